//! Test-only oracles and generators. The oracles use raw arithmetic on the
//! scene data and share no code with the library's evaluation paths.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_core::channel::{ElementState, LinkBudget, Mode, ReflectionModel, RisConfiguration};
use ris_core::geometry::{Direction, Pose, RisArray, Scene, Vec3};

pub const C0: f64 = 299_792_458.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn db(p: f64) -> f64 {
    10.0 * p.log10()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn len(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn gamma(model: &ReflectionModel, s: ElementState) -> Complex64 {
    let deg = PI / 180.0;
    match s {
        ElementState::PassiveA => Complex64::from_polar(model.passive_magnitude, model.passive_phases_deg[0] * deg),
        ElementState::PassiveB => Complex64::from_polar(model.passive_magnitude, model.passive_phases_deg[1] * deg),
        ElementState::ActiveOn => Complex64::new(model.active_on_gain, 0.0),
        ElementState::ActiveOff => Complex64::new(0.0, 0.0),
    }
}

/// Received power by direct summation over the raw element positions.
///
/// TX and RX are taken into the array frame as `Rᵀ(x − t)`. Only relative
/// phases matter for `|Σ|²`, so each element's phase uses its path length
/// in excess of the origin path, written as `(|p|² − 2p·v)/(|v − p| + |v|)`
/// per leg to avoid cancellation.
pub fn direct_received_power(
    array: &RisArray,
    scene: &Scene,
    config: &RisConfiguration,
    model: &ReflectionModel,
    budget: &LinkBudget,
) -> f64 {
    let r = scene.ris_pose().rotation();
    let t: [f64; 3] = scene.ris_pose().translation().into();
    let to_local = |x: [f64; 3]| {
        let d = sub(x, t);
        [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
            r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2],
        ]
    };
    let tx = to_local(scene.tx_position().into());
    let rx = to_local(scene.rx_position().into());
    let lambda = C0 / array.carrier_frequency();
    let q = array.pattern_exponent();
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut re = 0.0;
    let mut im = 0.0;
    for (el, state) in array.elements().iter().zip(config.states()) {
        let p: [f64; 3] = el.position.into();
        let dt = sub(tx, p);
        let dr = sub(rx, p);
        let (rt, rr) = (len(dt), len(dr));
        let excess = (dot(p, p) - 2.0 * dot(p, tx)) / (rt + len(tx)) + (dot(p, p) - 2.0 * dot(p, rx)) / (rr + len(rx));
        // element normal is local +z
        let cos_t = dt[2] / rt;
        let cos_r = dr[2] / rr;
        let amp = (cos_t * cos_r).powf(q);
        let g = gamma(model, *state);
        let phase = -2.0 * PI * excess / lambda;
        let mag = amp / (rt * rr);
        re += mag * (g.re * phase.cos() - g.im * phase.sin());
        im += mag * (g.re * phase.sin() + g.im * phase.cos());
    }
    let pre = budget.tx_power * budget.tx_gain * array.element_gain() * budget.rx_gain * array.element_area()
        * lambda
        * lambda
        / (64.0 * PI * PI * PI);
    pre * (re * re + im * im)
}

/// Active selection written out step by step with scalar arithmetic.
pub fn transcribed_active_on_set(phasors: &[Complex64]) -> Vec<bool> {
    let k = phasors.len();
    // line: angle(S .^ 2), principal value in (-pi, pi]
    let mut angle_sum = 0.0;
    for s in phasors {
        let sq_re = s.re * s.re - s.im * s.im;
        let sq_im = s.re * s.im + s.im * s.re;
        let mut a = sq_im.atan2(sq_re);
        if a == -PI {
            a = PI;
        }
        angle_sum += a;
    }
    // line: S' = S * exp(-j * mean(.) / 2)
    let half = -(angle_sum / k as f64) / 2.0;
    let (c, sn) = (half.cos(), half.sin());
    let re_rot: Vec<f64> = phasors.iter().map(|s| s.re * c - s.im * sn).collect();
    // line: if sum(real(S')) >= K/2
    let mut total = 0.0;
    for v in &re_rot {
        total += v;
    }
    if total >= k as f64 / 2.0 {
        re_rot.iter().map(|v| *v >= 0.0).collect()
    } else {
        re_rot.iter().map(|v| *v < 0.0).collect()
    }
}

pub fn random_direction(rng: &mut impl Rng, max_deg: f64) -> Direction {
    Direction::new(
        rng.random_range(-max_deg..=max_deg),
        rng.random_range(-max_deg..=max_deg),
    )
    .unwrap()
}

pub fn random_pose(rng: &mut impl Rng) -> Pose {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-3 { Vec3::new(0.0, 0.0, 1.0) } else { axis };
    let t = Vec3::new(
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
    );
    Pose::from_axis_angle(axis, rng.random_range(-PI..PI), t).unwrap()
}

/// Random pose with TX and RX in front of the array within ±`max_deg`.
pub fn random_scene(rng: &mut impl Rng, max_deg: f64, ranges: (f64, f64)) -> Scene {
    let pose = random_pose(rng);
    let tx = ris_core::geometry::direction_to_position(random_direction(rng, max_deg), rng.random_range(ranges.0..ranges.1)).unwrap();
    let rx = ris_core::geometry::direction_to_position(random_direction(rng, max_deg), rng.random_range(ranges.0..ranges.1)).unwrap();
    Scene::new(pose, pose.local_to_world(tx), pose.local_to_world(rx)).unwrap()
}

pub fn random_configuration(rng: &mut impl Rng, mode: Mode, k: usize) -> RisConfiguration {
    let [a, b] = mode.states();
    let states = (0..k).map(|_| if rng.random_bool(0.5) { a } else { b }).collect();
    RisConfiguration::new(mode, states).unwrap()
}

pub fn random_model(rng: &mut impl Rng) -> ReflectionModel {
    let a: f64 = rng.random_range(0.0..360.0);
    let mut b: f64 = rng.random_range(0.0..360.0);
    if (a - b).abs() < 1.0 {
        b = (a + 90.0) % 360.0;
    }
    ReflectionModel {
        passive_magnitude: rng.random_range(0.3..0.99),
        passive_phases_deg: [a, b],
        active_on_gain: rng.random_range(1.01..3.0),
    }
}
