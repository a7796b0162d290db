//! Element-wise received power model and its wideband extension.
//!
//! For a RIS without a direct TX–RX path the received power is
//!
//! ```text
//! P_R = P_T · G_T·G_ELM·G_R·A_ELM·λ² / (64π³)
//!       · | Σ_k √F_k · Γ_k / (r_k^T · r_k^R) · exp(−j2π(r_k^T + r_k^R)/λ) |²
//! ```
//!
//! where `F_k` derates the element gain off boresight and `Γ_k` is the
//! complex reflection coefficient selected by the element state.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RisError};
use crate::geometry::{
    incidence_angles, path_lengths, position_to_direction, Direction, RisArray, Scene, Vec3,
};
use crate::SPEED_OF_LIGHT;

/// Complex reflection coefficients for every element state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionModel {
    /// Linear amplitude of both passive states.
    pub passive_magnitude: f64,
    /// Phases of the two passive states, degrees.
    pub passive_phases_deg: [f64; 2],
    /// Linear amplitude of an ON element (phase 0).
    pub active_on_gain: f64,
}

impl ReflectionModel {
    /// −1 dB passive reflection, {0°, 67°} states, +3 dB active re-radiation.
    pub fn standard() -> Self {
        ReflectionModel {
            passive_magnitude: db_to_amplitude(-1.0),
            passive_phases_deg: [0.0, 67.0],
            active_on_gain: db_to_amplitude(3.0),
        }
    }

    /// Lossless passive states 180° apart.
    pub fn ideal_passive() -> Self {
        ReflectionModel {
            passive_magnitude: 1.0,
            passive_phases_deg: [0.0, 180.0],
            ..ReflectionModel::standard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.passive_magnitude > 0.0 && self.passive_magnitude <= 1.0) {
            return Err(RisError::invalid(format!(
                "passive magnitude must be in (0, 1], got {}",
                self.passive_magnitude
            )));
        }
        if !(self.active_on_gain >= 1.0 && self.active_on_gain.is_finite()) {
            return Err(RisError::invalid(format!(
                "active ON gain must be >= 1, got {}",
                self.active_on_gain
            )));
        }
        let [a, b] = self.passive_phases_deg;
        if !(a.is_finite() && b.is_finite()) || (a - b).rem_euclid(360.0) == 0.0 {
            return Err(RisError::invalid(
                "passive phases must be two distinct angles modulo 360°",
            ));
        }
        Ok(())
    }
}

impl Default for ReflectionModel {
    fn default() -> Self {
        ReflectionModel::standard()
    }
}

/// Switch state of one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementState {
    #[serde(rename = "A")]
    PassiveA,
    #[serde(rename = "B")]
    PassiveB,
    #[serde(rename = "ON")]
    ActiveOn,
    #[serde(rename = "OFF")]
    ActiveOff,
}

impl ElementState {
    pub fn mode(self) -> Mode {
        match self {
            ElementState::PassiveA | ElementState::PassiveB => Mode::Passive,
            ElementState::ActiveOn | ElementState::ActiveOff => Mode::Active,
        }
    }

    /// Single-character form used in compact configuration strings.
    pub fn as_char(self) -> char {
        match self {
            ElementState::PassiveA => 'A',
            ElementState::PassiveB => 'B',
            ElementState::ActiveOn => '1',
            ElementState::ActiveOff => '0',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'A' => Some(ElementState::PassiveA),
            'B' => Some(ElementState::PassiveB),
            '1' => Some(ElementState::ActiveOn),
            '0' => Some(ElementState::ActiveOff),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Passive,
    Active,
}

impl Mode {
    /// The two states available in this mode, in lexicographic order.
    pub fn states(self) -> [ElementState; 2] {
        match self {
            Mode::Passive => [ElementState::PassiveA, ElementState::PassiveB],
            Mode::Active => [ElementState::ActiveOn, ElementState::ActiveOff],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Passive => "passive",
            Mode::Active => "active",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = RisError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passive" => Ok(Mode::Passive),
            "active" => Ok(Mode::Active),
            _ => Err(RisError::invalid(format!("unknown mode `{s}`"))),
        }
    }
}

pub fn reflection_coefficient(model: &ReflectionModel, state: ElementState) -> Complex64 {
    match state {
        ElementState::PassiveA => {
            Complex64::from_polar(model.passive_magnitude, model.passive_phases_deg[0].to_radians())
        }
        ElementState::PassiveB => {
            Complex64::from_polar(model.passive_magnitude, model.passive_phases_deg[1].to_radians())
        }
        ElementState::ActiveOn => Complex64::new(model.active_on_gain, 0.0),
        ElementState::ActiveOff => Complex64::new(0.0, 0.0),
    }
}

/// Mode flag plus one state per element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ConfigurationDoc")]
pub struct RisConfiguration {
    mode: Mode,
    states: Vec<ElementState>,
}

#[derive(Deserialize)]
struct ConfigurationDoc {
    mode: Mode,
    states: Vec<ElementState>,
}

impl TryFrom<ConfigurationDoc> for RisConfiguration {
    type Error = RisError;
    fn try_from(d: ConfigurationDoc) -> Result<Self> {
        RisConfiguration::new(d.mode, d.states)
    }
}

impl RisConfiguration {
    pub fn new(mode: Mode, states: Vec<ElementState>) -> Result<Self> {
        if states.is_empty() {
            return Err(RisError::invalid("configuration has no elements"));
        }
        if let Some(bad) = states.iter().position(|s| s.mode() != mode) {
            return Err(RisError::invalid(format!(
                "element {} has state {:?} in a {mode} configuration",
                bad + 1,
                states[bad]
            )));
        }
        Ok(RisConfiguration { mode, states })
    }

    pub fn uniform(mode: Mode, state: ElementState, k: usize) -> Result<Self> {
        RisConfiguration::new(mode, vec![state; k])
    }

    /// Every element switched off; used for chamber calibration.
    pub fn all_off(k: usize) -> Self {
        RisConfiguration {
            mode: Mode::Active,
            states: vec![ElementState::ActiveOff; k],
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn states(&self) -> &[ElementState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_all_off(&self) -> bool {
        self.states.iter().all(|s| *s == ElementState::ActiveOff)
    }

    /// Compact form: one character per element (`A`, `B`, `1`, `0`).
    pub fn to_compact(&self) -> String {
        self.states.iter().map(|s| s.as_char()).collect()
    }

    pub fn from_compact(s: &str) -> Result<Self> {
        let states = s
            .chars()
            .map(|c| {
                ElementState::from_char(c)
                    .ok_or_else(|| RisError::Format(format!("bad state character `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mode = states
            .first()
            .map(|s| s.mode())
            .ok_or_else(|| RisError::Format("empty configuration string".into()))?;
        RisConfiguration::new(mode, states)
    }

    fn check_len(&self, array: &RisArray) -> Result<()> {
        if self.len() != array.len() {
            return Err(RisError::invalid(format!(
                "configuration has {} states, array has {} elements",
                self.len(),
                array.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for RisConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_compact())
    }
}

/// Transmit power and antenna gains (linear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power > 0.0 && self.tx_gain > 0.0 && self.rx_gain > 0.0) {
            return Err(RisError::invalid("link budget entries must be > 0"));
        }
        Ok(())
    }
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            tx_power: 1.0,
            tx_gain: 1.0,
            rx_gain: 1.0,
        }
    }
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// `cos^{2q}(θ_T) · cos^{2q}(θ_R)` with `q` the array's pattern exponent.
pub fn element_derating(array: &RisArray, theta_tx: f64, theta_rx: f64) -> Result<f64> {
    let half_pi = PI / 2.0;
    for t in [theta_tx, theta_rx] {
        if !(0.0..half_pi).contains(&t) {
            return Err(RisError::Domain(format!(
                "incidence angle {t} rad outside [0, π/2)"
            )));
        }
    }
    let q2 = 2.0 * array.pattern_exponent();
    if q2 == 0.0 {
        return Ok(1.0);
    }
    Ok(theta_tx.cos().powf(q2) * theta_rx.cos().powf(q2))
}

/// Per-element amplitude and total path length, frequency independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPath {
    /// `√F_k / (r_k^T · r_k^R)`.
    pub amplitude: f64,
    /// `r_k^T + r_k^R`, meters.
    pub length: f64,
    /// `length` minus [`reference_path_length`], computed without
    /// cancellation so relative phases stay accurate at large ranges.
    pub excess: f64,
}

/// TX → array origin → RX path length.
pub fn reference_path_length(scene: &Scene) -> f64 {
    scene.tx_local().norm() + scene.rx_local().norm()
}

/// `|v − p| − |v|` as `(|p|² − 2 p·v) / (|v − p| + |v|)`.
fn leg_excess(v: Vec3, p: Vec3) -> f64 {
    (p.dot(p) - 2.0 * p.dot(v)) / ((v - p).norm() + v.norm())
}

pub fn element_paths(array: &RisArray, scene: &Scene) -> Result<Vec<ElementPath>> {
    let lengths = path_lengths(array, scene)?;
    let angles = incidence_angles(array, scene)?;
    let (tx, rx) = (scene.tx_local(), scene.rx_local());
    lengths
        .iter()
        .zip(&angles)
        .zip(array.elements())
        .map(|((l, a), e)| {
            let f = element_derating(array, a.tx, a.rx)?;
            Ok(ElementPath {
                amplitude: f.sqrt() / (l.tx * l.rx),
                length: l.tx + l.rx,
                excess: leg_excess(tx, e.position) + leg_excess(rx, e.position),
            })
        })
        .collect()
}

/// Per-element complex responses `√F_k / (r^T r^R) · e^{−j2πf(r^T + r^R)/c₀}`
/// at frequency `f`, up to the common factor `e^{−j2πf·L₀/c₀}` of the
/// reference path; received field is `Σ Γ_k · response_k`.
pub fn element_responses(paths: &[ElementPath], frequency: f64) -> Vec<Complex64> {
    let k = -2.0 * PI * frequency / SPEED_OF_LIGHT;
    paths
        .iter()
        .map(|p| Complex64::from_polar(p.amplitude, k * p.excess))
        .collect()
}

/// `P_T·G_T·G_ELM·G_R·A_ELM·λ²/(64π³)` at the given frequency.
pub fn power_prefactor(array: &RisArray, budget: &LinkBudget, frequency: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT / frequency;
    budget.tx_power
        * budget.tx_gain
        * array.element_gain()
        * budget.rx_gain
        * array.element_area()
        * lambda
        * lambda
        / (64.0 * PI.powi(3))
}

fn coefficients(model: &ReflectionModel, config: &RisConfiguration) -> Vec<Complex64> {
    config
        .states()
        .iter()
        .map(|s| reflection_coefficient(model, *s))
        .collect()
}

/// Narrowband received power at the array's carrier frequency, watts.
pub fn received_power(
    array: &RisArray,
    scene: &Scene,
    config: &RisConfiguration,
    model: &ReflectionModel,
    budget: &LinkBudget,
) -> Result<f64> {
    config.check_len(array)?;
    if config.is_all_off() {
        return Ok(0.0);
    }
    let f = array.carrier_frequency();
    let paths = element_paths(array, scene)?;
    let responses = element_responses(&paths, f);
    let field: Complex64 = coefficients(model, config)
        .iter()
        .zip(&responses)
        .map(|(g, r)| g * r)
        .sum();
    Ok(power_prefactor(array, budget, f) * field.norm_sqr())
}

/// Power of the phase-aligned continuous-phase configuration whose element
/// magnitudes are `magnitudes`; upper-bounds any discrete configuration with
/// those magnitudes.
pub fn coherent_bound(
    array: &RisArray,
    scene: &Scene,
    magnitudes: &[f64],
    budget: &LinkBudget,
) -> Result<f64> {
    if magnitudes.len() != array.len() {
        return Err(RisError::invalid("one magnitude per element required"));
    }
    let paths = element_paths(array, scene)?;
    let sum: f64 = paths.iter().zip(magnitudes).map(|(p, m)| p.amplitude * m).sum();
    Ok(power_prefactor(array, budget, array.carrier_frequency()) * sum * sum)
}

/// Complex channel transfer function at each frequency (√W amplitude).
/// `|H(f_c)|²` equals [`received_power`] at the carrier.
pub fn synthetic_ctf(
    array: &RisArray,
    scene: &Scene,
    config: &RisConfiguration,
    model: &ReflectionModel,
    budget: &LinkBudget,
    frequencies: &[f64],
) -> Result<Vec<Complex64>> {
    config.check_len(array)?;
    if frequencies.is_empty() {
        return Err(RisError::invalid("no frequencies given"));
    }
    if let Some(f) = frequencies.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(RisError::invalid(format!("frequency must be > 0, got {f}")));
    }
    let paths = element_paths(array, scene)?;
    let reference = reference_path_length(scene);
    let gammas = coefficients(model, config);
    let scale = (budget.tx_power
        * budget.tx_gain
        * array.element_gain()
        * budget.rx_gain
        * array.element_area()
        / (64.0 * PI.powi(3)))
    .sqrt();
    let active: Vec<(Complex64, &ElementPath)> = gammas
        .into_iter()
        .zip(&paths)
        .filter(|(g, _)| *g != Complex64::new(0.0, 0.0))
        .collect();
    let wavenumber = |f: f64| -2.0 * PI * f / SPEED_OF_LIGHT;
    let fields: Vec<Complex64> = match uniform_step(frequencies) {
        // Rotate each element's phasor from one subcarrier to the next.
        Some(df) => {
            let mut terms: Vec<(Complex64, Complex64)> = active
                .iter()
                .map(|(g, p)| {
                    (
                        g * Complex64::from_polar(p.amplitude, wavenumber(frequencies[0]) * p.excess),
                        Complex64::from_polar(1.0, wavenumber(df) * p.excess),
                    )
                })
                .collect();
            frequencies
                .iter()
                .map(|_| {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for (z, step) in terms.iter_mut() {
                        sum += *z;
                        *z *= *step;
                    }
                    sum
                })
                .collect()
        }
        None => frequencies
            .iter()
            .map(|&f| {
                active
                    .iter()
                    .map(|(g, p)| g * Complex64::from_polar(p.amplitude, wavenumber(f) * p.excess))
                    .sum()
            })
            .collect(),
    };
    Ok(frequencies
        .iter()
        .zip(fields)
        .map(|(&f, field)| field * Complex64::from_polar(scale * SPEED_OF_LIGHT / f, wavenumber(f) * reference))
        .collect())
}

/// Common spacing when the grid has at least three uniformly spaced points.
fn uniform_step(frequencies: &[f64]) -> Option<f64> {
    if frequencies.len() < 3 {
        return None;
    }
    let df = (frequencies[frequencies.len() - 1] - frequencies[0]) / (frequencies.len() - 1) as f64;
    let uniform = df != 0.0
        && frequencies
            .iter()
            .enumerate()
            .all(|(i, f)| (f - (frequencies[0] + i as f64 * df)).abs() <= 1e-9 * df.abs());
    uniform.then_some(df)
}

/// Static mirror-like ray from the mounting structure around the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticComponent {
    /// Direction of the specular lobe in the RIS frame.
    pub direction: Direction,
    /// Peak linear amplitude of the ray, √W.
    pub gain: f64,
    /// Gaussian angular width of the lobe, degrees (1σ).
    pub beamwidth_deg: f64,
}

impl StaticComponent {
    /// Amplitude seen by an RX in direction `rx`.
    pub fn amplitude_towards(&self, rx: &Direction) -> f64 {
        let sep = self.direction.separation(rx);
        self.gain * (-0.5 * (sep / self.beamwidth_deg).powi(2)).exp()
    }
}

/// Length of the TX → plate → RX path, mirroring TX in the RIS plane.
pub fn mirror_path_length(scene: &Scene) -> f64 {
    let tx = scene.tx_local();
    let mirrored = crate::geometry::Vec3::new(tx.x, tx.y, -tx.z);
    mirrored.distance(scene.rx_local())
}

/// Adds one deterministic ray with delay from the geometric mirror path and
/// a frequency-flat amplitude to `ctf`.
pub fn add_static_component(
    ctf: &[Complex64],
    frequencies: &[f64],
    scene: &Scene,
    component: &StaticComponent,
) -> Result<Vec<Complex64>> {
    if ctf.len() != frequencies.len() {
        return Err(RisError::invalid("CTF and frequency grid differ in length"));
    }
    if !(component.gain >= 0.0 && component.beamwidth_deg > 0.0) {
        return Err(RisError::invalid("static component needs gain >= 0 and width > 0"));
    }
    if component.gain == 0.0 {
        return Ok(ctf.to_vec());
    }
    let (rx_dir, _) = position_to_direction(scene.rx_local())?;
    let amplitude = component.amplitude_towards(&rx_dir);
    let length = mirror_path_length(scene);
    Ok(ctf
        .iter()
        .zip(frequencies)
        .map(|(h, &f)| h + Complex64::from_polar(amplitude, -2.0 * PI * f * length / SPEED_OF_LIGHT))
        .collect())
}
