mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use ris_core::beamform::{
    exhaustive_select, phase_profile, select_active, select_active_with, select_passive, ActiveRotation,
    PassiveStateSet, PhaseProfile,
};
use ris_core::channel::{received_power, ElementState, LinkBudget, Mode, ReflectionModel, RisConfiguration};
use ris_core::geometry::{Direction, ElementGeometry, Pose, RisArray, Scene, Vec3};
use ris_core::sounder::ScanSetup;
use ris_core::{RisError, SPEED_OF_LIGHT};

fn on_set(c: &RisConfiguration) -> Vec<bool> {
    c.states().iter().map(|s| *s == ElementState::ActiveOn).collect()
}

fn arb_phasors(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_k)
}

fn profile(angles: &[f64]) -> PhaseProfile {
    PhaseProfile::from_phasors(angles.iter().map(|a| Complex64::from_polar(1.0, *a)).collect()).unwrap()
}

#[test]
fn default_scene_phasors_match_raw_norms() {
    let setup = ScanSetup::standard();
    let p = phase_profile(&setup.array, &setup.scene).unwrap();
    let tx = setup.scene.tx_position();
    let rx = setup.scene.rx_position();
    for (e, s) in setup.array.elements().iter().zip(p.phasors()) {
        let l = (tx - e.position).norm() + (rx - e.position).norm();
        let want = Complex64::from_polar(1.0, -2.0 * PI * 26e9 * l / SPEED_OF_LIGHT);
        assert!((s - want).norm() < 1e-10);
    }
}

#[test]
fn passive_examples() {
    let states = PassiveStateSet::default();
    let c = select_passive(&PhaseProfile::from_psi(vec![0.0, 67f64.to_radians()]).unwrap(), &states);
    assert_eq!(c.states(), &[ElementState::PassiveA, ElementState::PassiveB]);
    // 213.5° sits halfway between the antipodes of 0° and 67°.
    let psi = 213.5f64.to_radians();
    let da = (Complex64::from_polar(1.0, psi) - Complex64::from_polar(1.0, 0.0)).norm();
    let db = (Complex64::from_polar(1.0, psi) - Complex64::from_polar(1.0, 67f64.to_radians())).norm();
    let c = select_passive(&PhaseProfile::from_psi(vec![psi]).unwrap(), &states);
    let want = if da <= db { ElementState::PassiveA } else { ElementState::PassiveB };
    assert_eq!(c.states()[0], want);
    assert!((da - db).abs() < 1e-12, "213.5° is a tie to rounding");
}

#[test]
fn active_examples() {
    let ones = PhaseProfile::from_phasors(vec![Complex64::new(1.0, 0.0); 5]).unwrap();
    assert!(on_set(&select_active(&ones)).iter().all(|x| *x));
    let js = PhaseProfile::from_phasors(vec![Complex64::new(0.0, 1.0); 5]).unwrap();
    assert!(on_set(&select_active(&js)).iter().all(|x| *x));
    let four: Vec<Complex64> = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
        .iter()
        .map(|(r, i)| Complex64::new(*r, *i))
        .collect();
    let got = on_set(&select_active(&PhaseProfile::from_phasors(four.clone()).unwrap()));
    assert_eq!(got, common::transcribed_active_on_set(&four));
}

#[test]
fn exhaustive_small_cases() {
    let one = RisArray::from_elements(vec![ElementGeometry { index: 1, position: Vec3::ZERO }], 0.01, 26e9, 1.0, 1e-4, 1.0).unwrap();
    let scene = Scene::new(Pose::identity(), Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.5, 0.0, 2.0)).unwrap();
    let m = ReflectionModel::standard();
    let (c, p) = exhaustive_select(&one, &scene, &m, &LinkBudget::default(), Mode::Active).unwrap();
    assert_eq!(c.states(), &[ElementState::ActiveOn]);
    assert!(p > 0.0);

    let two = RisArray::from_elements(
        vec![
            ElementGeometry { index: 1, position: Vec3::new(-0.01, 0.0, 0.0) },
            ElementGeometry { index: 2, position: Vec3::new(0.01, 0.0, 0.0) },
        ],
        0.01,
        26e9,
        1.0,
        1e-4,
        1.0,
    )
    .unwrap();
    let sym = Scene::new(Pose::identity(), Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.5, 3.0)).unwrap();
    let (c, _) = exhaustive_select(&two, &sym, &m, &LinkBudget::default(), Mode::Passive).unwrap();
    assert_eq!(c.states()[0], c.states()[1]);

    let big = RisArray::standard().truncated(21).unwrap();
    let far = Scene::new(Pose::identity(), Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.5, 3.0)).unwrap();
    assert!(matches!(
        exhaustive_select(&big, &far, &m, &LinkBudget::default(), Mode::Active),
        Err(RisError::Capacity { .. })
    ));
}

#[test]
fn exhaustive_beats_random_sampling() {
    let mut rng = common::rng(21);
    let a = RisArray::standard().truncated(10).unwrap();
    let scene = common::random_scene(&mut rng, 45.0, (1.0, 5.0));
    let m = ReflectionModel::standard();
    for mode in [Mode::Passive, Mode::Active] {
        let (_, best) = exhaustive_select(&a, &scene, &m, &LinkBudget::default(), mode).unwrap();
        for _ in 0..1000 {
            let c = common::random_configuration(&mut rng, mode, 10);
            assert!(received_power(&a, &scene, &c, &m, &LinkBudget::default()).unwrap() <= best);
        }
    }
}

#[test]
fn circular_rotation_is_available() {
    let mut rng = common::rng(8);
    let angles: Vec<f64> = (0..37).map(|_| rng.random_range(-PI..PI)).collect();
    let p = profile(&angles);
    let a = select_active_with(&p, ActiveRotation::CircularMean);
    assert_eq!(a.len(), 37);
    assert_eq!(select_active(&p), select_active_with(&p, ActiveRotation::ArithmeticMean));
}

/// Active selection at least matches passive selection on the targets the
/// acceptance suite sweeps (15° sub-grid outside the TX cone).
#[test]
fn active_beats_passive_on_the_acceptance_sweep() {
    let setup = ScanSetup::standard();
    let tx = setup.scene.tx_direction();
    let states = PassiveStateSet::from_model(&setup.model).unwrap();
    let mut losses = Vec::new();
    for el in (-45..=45).step_by(15) {
        for az in (-45..=45).step_by(15) {
            let d = Direction::new(az as f64, el as f64).unwrap();
            if d.separation(&tx) < 8.0 {
                continue;
            }
            let scene = setup.scene.with_rx_direction(d, 5.0).unwrap();
            let prof = phase_profile(&setup.array, &scene).unwrap();
            let pa = received_power(&setup.array, &scene, &select_active(&prof), &setup.model, &setup.budget).unwrap();
            let pp = received_power(&setup.array, &scene, &select_passive(&prof, &states), &setup.model, &setup.budget)
                .unwrap();
            if pa < pp {
                losses.push(format!("{d}: {:.2} dB", common::db(pa / pp)));
            }
        }
    }
    assert!(losses.is_empty(), "active below passive at {losses:?}");
}

proptest! {
    #[test]
    fn passive_selection_is_elementwise(angles in arb_phasors(37), seed in any::<u64>()) {
        let states = PassiveStateSet::default();
        let base = select_passive(&PhaseProfile::from_psi(angles.clone()).unwrap(), &states);
        let mut rng = common::rng(seed);
        let mut perm: Vec<usize> = (0..angles.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<f64> = perm.iter().map(|&i| angles[i]).collect();
        let got = select_passive(&PhaseProfile::from_psi(shuffled).unwrap(), &states);
        for (j, &i) in perm.iter().enumerate() {
            prop_assert_eq!(got.states()[j], base.states()[i]);
        }
    }

    #[test]
    fn global_phase_gives_same_set_or_complement(angles in arb_phasors(37), beta in -PI..PI) {
        let base = on_set(&select_active(&profile(&angles)));
        let rotated: Vec<f64> = angles.iter().map(|a| a + beta).collect();
        let got = on_set(&select_active(&profile(&rotated)));
        let complement: Vec<bool> = base.iter().map(|x| !x).collect();
        prop_assert!(got == base || got == complement);
    }

    #[test]
    fn global_phase_gives_same_set_or_complement_circular(angles in arb_phasors(37), beta in -PI..PI) {
        let sel = |a: &[f64]| on_set(&select_active_with(&profile(a), ActiveRotation::CircularMean));
        let base = sel(&angles);
        let rotated: Vec<f64> = angles.iter().map(|a| a + beta).collect();
        let got = sel(&rotated);
        let complement: Vec<bool> = base.iter().map(|x| !x).collect();
        prop_assert!(got == base || got == complement);
    }

    #[test]
    fn active_on_set_is_one_real_half_plane(angles in arb_phasors(37)) {
        let p = profile(&angles);
        let got = on_set(&select_active(&p));
        let k = angles.len() as f64;
        let mean = p.phasors().iter().map(|s| {
            let a = (s * s).arg();
            if a == -PI { PI } else { a }
        }).sum::<f64>() / k;
        let re: Vec<f64> = p.phasors().iter().map(|s| (s * Complex64::from_polar(1.0, -mean / 2.0)).re).collect();
        let upper: Vec<bool> = re.iter().map(|r| *r >= 0.0).collect();
        let lower: Vec<bool> = re.iter().map(|r| *r < 0.0).collect();
        prop_assert!(got == upper || got == lower);
        // ON and OFF partition the elements.
        let on = got.iter().filter(|x| **x).count();
        let off = select_active(&p).states().iter().filter(|s| **s == ElementState::ActiveOff).count();
        prop_assert_eq!(on + off, angles.len());
    }
}
