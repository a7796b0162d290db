//! Binary element-state selection.
//!
//! Every selector starts from the cumulative phase of each element,
//! `Ψ_k = 2π f (r_k^T + r_k^R) / c₀`, and its phasor `S_k = e^{−jΨ_k}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    element_paths, element_responses, reflection_coefficient, received_power, ElementState,
    LinkBudget, Mode, ReflectionModel, RisConfiguration,
};
use crate::error::{Result, RisError};
use crate::geometry::{path_lengths, RisArray, Scene};
use crate::SPEED_OF_LIGHT;

/// Largest array accepted by [`exhaustive_select`].
pub const EXHAUSTIVE_MAX_ELEMENTS: usize = 20;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    psi: Vec<f64>,
    phasors: Vec<Complex64>,
}

impl PhaseProfile {
    /// Builds phasors `e^{−jΨ_k}` from unreduced phases.
    pub fn from_psi(psi: Vec<f64>) -> Result<Self> {
        if psi.is_empty() {
            return Err(RisError::invalid("phase profile is empty"));
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(RisError::invalid("phases must be finite"));
        }
        let phasors = psi.iter().map(|p| Complex64::from_polar(1.0, -p)).collect();
        Ok(PhaseProfile { psi, phasors })
    }

    /// Takes unit phasors directly; `Ψ_k` is recovered in `[0, 2π)`.
    pub fn from_phasors(phasors: Vec<Complex64>) -> Result<Self> {
        if phasors.is_empty() {
            return Err(RisError::invalid("phase profile is empty"));
        }
        if let Some(k) = phasors.iter().position(|s| (s.norm() - 1.0).abs() > UNIT_TOL) {
            return Err(RisError::invalid(format!("phasor {} is not unit magnitude", k + 1)));
        }
        let psi = phasors
            .iter()
            .map(|s| (-s.arg()).rem_euclid(2.0 * PI))
            .collect();
        Ok(PhaseProfile { psi, phasors })
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn phasors(&self) -> &[Complex64] {
        &self.phasors
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

/// Cumulative TX → element → RX phase at the carrier.
pub fn phase_profile(array: &RisArray, scene: &Scene) -> Result<PhaseProfile> {
    let k = 2.0 * PI * array.carrier_frequency() / SPEED_OF_LIGHT;
    let psi = path_lengths(array, scene)?
        .iter()
        .map(|l| k * (l.tx + l.rx))
        .collect();
    PhaseProfile::from_psi(psi)
}

/// The two selectable passive phase shifts, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassiveStateSet {
    alphas_deg: [f64; 2],
}

impl PassiveStateSet {
    pub fn new(alphas_deg: [f64; 2]) -> Result<Self> {
        let [a, b] = alphas_deg;
        if !(a.is_finite() && b.is_finite()) || (a - b).rem_euclid(360.0) == 0.0 {
            return Err(RisError::invalid("passive states must differ modulo 360°"));
        }
        Ok(PassiveStateSet { alphas_deg })
    }

    pub fn from_model(model: &ReflectionModel) -> Result<Self> {
        PassiveStateSet::new(model.passive_phases_deg)
    }

    pub fn alphas_deg(&self) -> [f64; 2] {
        self.alphas_deg
    }
}

impl Default for PassiveStateSet {
    fn default() -> Self {
        PassiveStateSet {
            alphas_deg: [0.0, 67.0],
        }
    }
}

/// Per element, picks the state `α_i` minimising `|e^{jΨ_k} − e^{jα_i}|`.
/// Exact ties go to the first state.
pub fn select_passive(profile: &PhaseProfile, states: &PassiveStateSet) -> RisConfiguration {
    let [a, b] = states.alphas_deg.map(|d| Complex64::from_polar(1.0, d.to_radians()));
    let chosen = profile
        .psi
        .iter()
        .map(|&psi| {
            let target = Complex64::from_polar(1.0, psi);
            if (target - a).norm() <= (target - b).norm() {
                ElementState::PassiveA
            } else {
                ElementState::PassiveB
            }
        })
        .collect();
    RisConfiguration::new(Mode::Passive, chosen).expect("passive states only")
}

/// How the common phase rotation of the active selector is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveRotation {
    /// Arithmetic mean of principal-value angles of `S_k²`.
    #[default]
    ArithmeticMean,
    /// Argument of `Σ S_k²`; immune to the ±π wrap.
    CircularMean,
}

/// Principal argument in `(−π, π]`.
fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

pub fn select_active(profile: &PhaseProfile) -> RisConfiguration {
    select_active_with(profile, ActiveRotation::ArithmeticMean)
}

/// Rotates the phasors by half the mean angle of `S²`, then switches ON one
/// real half-plane: the non-negative half when `Σ Re(S′) ≥ K/2`, otherwise
/// the strictly negative half.
pub fn select_active_with(profile: &PhaseProfile, rotation: ActiveRotation) -> RisConfiguration {
    let k = profile.len();
    let mean_angle = match rotation {
        ActiveRotation::ArithmeticMean => {
            profile
                .phasors
                .iter()
                .map(|s| principal_arg(s * s))
                .sum::<f64>()
                / k as f64
        }
        ActiveRotation::CircularMean => {
            principal_arg(profile.phasors.iter().map(|s| s * s).sum::<Complex64>())
        }
    };
    let rot = Complex64::from_polar(1.0, -mean_angle / 2.0);
    let rotated_re: Vec<f64> = profile.phasors.iter().map(|s| (s * rot).re).collect();
    let upper = rotated_re.iter().sum::<f64>() >= k as f64 / 2.0;
    let states = rotated_re
        .iter()
        .map(|&re| {
            let on = if upper { re >= 0.0 } else { re < 0.0 };
            if on {
                ElementState::ActiveOn
            } else {
                ElementState::ActiveOff
            }
        })
        .collect();
    RisConfiguration::new(Mode::Active, states).expect("active states only")
}

/// Enumerates all `2^K` configurations of `mode` and returns the one with
/// the highest received power. Ties go to the lexicographically smallest
/// state vector (`A < B`, `ON < OFF`).
pub fn exhaustive_select(
    array: &RisArray,
    scene: &Scene,
    model: &ReflectionModel,
    budget: &LinkBudget,
    mode: Mode,
) -> Result<(RisConfiguration, f64)> {
    let k = array.len();
    if k > EXHAUSTIVE_MAX_ELEMENTS {
        return Err(RisError::Capacity {
            what: "element count for exhaustive search",
            got: k,
            limit: EXHAUSTIVE_MAX_ELEMENTS,
        });
    }
    let responses = element_responses(&element_paths(array, scene)?, array.carrier_frequency());
    let [first, second] = mode.states();
    let (g0, g1) = (
        reflection_coefficient(model, first),
        reflection_coefficient(model, second),
    );
    let terms: Vec<[Complex64; 2]> = responses.iter().map(|r| [g0 * r, g1 * r]).collect();
    // Bit (K-1-i) selects the second state for element i, so integer order
    // equals lexicographic order of the state vector.
    let field_power = |mask: u32| -> f64 {
        terms
            .iter()
            .enumerate()
            .map(|(i, t)| t[((mask >> (k - 1 - i)) & 1) as usize])
            .sum::<Complex64>()
            .norm_sqr()
    };
    let better = |a: (f64, u32), b: (f64, u32)| -> (f64, u32) {
        match a.0.total_cmp(&b.0) {
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Equal => {
                if a.1 <= b.1 {
                    a
                } else {
                    b
                }
            }
        }
    };
    let (_, mask) = (0..(1u32 << k))
        .into_par_iter()
        .map(|m| (field_power(m), m))
        .reduce(|| (f64::NEG_INFINITY, u32::MAX), better);
    let states = (0..k)
        .map(|i| if (mask >> (k - 1 - i)) & 1 == 0 { first } else { second })
        .collect();
    let config = RisConfiguration::new(mode, states)?;
    let power = received_power(array, scene, &config, model, budget)?;
    Ok((config, power))
}
