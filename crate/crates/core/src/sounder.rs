//! Synthetic multitone channel sounder.
//!
//! The chain per measurement is
//! `synthetic CTF → reception (repeated symbol, noise) → Ĥ = Y / (X·Ĥ_RF)
//! → unitary IDFT → windowed power after subtracting the all-OFF CIR`.
//!
//! Subcarrier `i ∈ 0..Q` sits at `f_c + (i − (Q−1)/2)·Δf`. The CIR uses the
//! unitary convention `h[n] = Q^{-1/2} Σ_i H[i] e^{+j2π i n / Q}`, so path
//! delay `τ` lands in bin `round(τ·B) mod Q` with `B = QΔf`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::{
    add_static_component, received_power, synthetic_ctf, LinkBudget, ReflectionModel,
    RisConfiguration, StaticComponent,
};
use crate::error::{Result, RisError};
use crate::geometry::{Direction, RisArray, Scene};

/// Subcarrier count of the reference sounder.
pub const DEFAULT_SUBCARRIERS: usize = 311;
/// Subcarrier spacing of the reference sounder, Hz.
pub const DEFAULT_SUBCARRIER_SPACING: f64 = 500e3;

/// Law used to draw the unit-magnitude subcarrier weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLaw {
    /// `X[q] = e^{jπq²/Q}` for `q = −(Q−1)/2 ..= (Q−1)/2`.
    #[default]
    Polyphase,
    /// Uniform random phases drawn from the waveform seed.
    RandomPhase,
}

impl WeightLaw {
    pub fn code(self) -> u8 {
        match self {
            WeightLaw::Polyphase => 0,
            WeightLaw::RandomPhase => 1,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(WeightLaw::Polyphase),
            1 => Ok(WeightLaw::RandomPhase),
            _ => Err(RisError::Format(format!("unknown weight law {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundingWaveform {
    subcarriers: usize,
    delta_f: f64,
    center_frequency: f64,
    repetitions: usize,
    seed: u64,
    law: WeightLaw,
    weights: Vec<Complex64>,
}

pub fn generate_waveform(
    subcarriers: usize,
    delta_f: f64,
    center_frequency: f64,
    seed: u64,
) -> Result<SoundingWaveform> {
    SoundingWaveform::new(subcarriers, delta_f, center_frequency, seed, WeightLaw::Polyphase, 2)
}

impl SoundingWaveform {
    pub fn new(
        subcarriers: usize,
        delta_f: f64,
        center_frequency: f64,
        seed: u64,
        law: WeightLaw,
        repetitions: usize,
    ) -> Result<Self> {
        if subcarriers == 0 || subcarriers % 2 == 0 {
            return Err(RisError::invalid(format!(
                "subcarrier count must be odd and >= 1, got {subcarriers}"
            )));
        }
        if !(delta_f > 0.0 && delta_f.is_finite()) {
            return Err(RisError::invalid("subcarrier spacing must be > 0"));
        }
        if !(center_frequency > 0.0 && center_frequency.is_finite()) {
            return Err(RisError::invalid("center frequency must be > 0"));
        }
        if repetitions == 0 {
            return Err(RisError::invalid("repetitions must be >= 1"));
        }
        let half = (subcarriers / 2) as i64;
        let weights = match law {
            WeightLaw::Polyphase => (-half..=half)
                .map(|q| {
                    // q² mod 2Q keeps the phase argument small and exact.
                    let r = ((q * q) % (2 * subcarriers as i64)) as f64;
                    Complex64::from_polar(1.0, PI * r / subcarriers as f64)
                })
                .collect(),
            WeightLaw::RandomPhase => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..subcarriers)
                    .map(|_| {
                        let u: f64 = rand::Rng::random(&mut rng);
                        Complex64::from_polar(1.0, 2.0 * PI * u)
                    })
                    .collect()
            }
        };
        Ok(SoundingWaveform {
            subcarriers,
            delta_f,
            center_frequency,
            repetitions,
            seed,
            law,
            weights,
        })
    }

    /// 311 subcarriers, 500 kHz spacing, 26 GHz, two repetitions.
    pub fn standard() -> Self {
        generate_waveform(DEFAULT_SUBCARRIERS, DEFAULT_SUBCARRIER_SPACING, 26e9, 0)
            .expect("defaults are valid")
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn law(&self) -> WeightLaw {
        self.law
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// `B = Q·Δf`.
    pub fn bandwidth(&self) -> f64 {
        self.subcarriers as f64 * self.delta_f
    }

    /// `T = 1/Δf`, the period of one multitone symbol.
    pub fn period(&self) -> f64 {
        1.0 / self.delta_f
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let half = (self.subcarriers / 2) as f64;
        (0..self.subcarriers)
            .map(|i| self.center_frequency + (i as f64 - half) * self.delta_f)
            .collect()
    }

    /// Spectrum of `repetitions` back-to-back copies of the symbol on the
    /// `repetitions·Q` FFT grid: the weights occupy every `repetitions`-th bin
    /// and the bins in between are zero.
    pub fn oversampled_spectrum(&self) -> Vec<Complex64> {
        let r = self.repetitions;
        let mut grid = vec![Complex64::new(0.0, 0.0); r * self.subcarriers];
        for (i, w) in self.weights.iter().enumerate() {
            grid[r * i] = *w * r as f64;
        }
        grid
    }
}

/// RF-chain response divided out of every estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFunction {
    response: Vec<Complex64>,
}

impl CalibrationFunction {
    pub fn new(response: Vec<Complex64>) -> Result<Self> {
        if response.is_empty() {
            return Err(RisError::Calibration("empty calibration function".into()));
        }
        if let Some(i) = response.iter().position(|h| h.norm() == 0.0 || !h.is_finite()) {
            return Err(RisError::Calibration(format!(
                "calibration entry {i} is zero or not finite"
            )));
        }
        Ok(CalibrationFunction { response })
    }

    pub fn unity(subcarriers: usize) -> Self {
        CalibrationFunction {
            response: vec![Complex64::new(1.0, 0.0); subcarriers],
        }
    }

    /// Back-to-back calibration: TX connected to RX through an attenuator of
    /// known linear amplitude gain. `received` is the noise-free spectrum.
    pub fn from_back_to_back(
        waveform: &SoundingWaveform,
        received: &[Complex64],
        attenuator_gain: f64,
    ) -> Result<Self> {
        if received.len() != waveform.subcarriers {
            return Err(RisError::invalid("back-to-back capture has wrong length"));
        }
        if !(attenuator_gain > 0.0) {
            return Err(RisError::invalid("attenuator gain must be > 0"));
        }
        CalibrationFunction::new(
            received
                .iter()
                .zip(&waveform.weights)
                .map(|(y, x)| y / (x * attenuator_gain))
                .collect(),
        )
    }

    pub fn response(&self) -> &[Complex64] {
        &self.response
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }
}

/// Receiver noise power per subcarrier, watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    power: f64,
}

impl Noise {
    pub const NONE: Noise = Noise { power: 0.0 };

    pub fn with_power(power: f64) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(RisError::invalid(format!("noise power must be >= 0, got {power}")));
        }
        Ok(Noise { power })
    }

    /// Noise at `snr_db` below `reference_power`; `+∞` dB means no noise.
    pub fn from_snr(snr_db: f64, reference_power: f64) -> Result<Self> {
        if snr_db == f64::INFINITY {
            return Ok(Noise::NONE);
        }
        if snr_db.is_nan() || !(reference_power >= 0.0) {
            return Err(RisError::invalid("SNR and reference power must be valid"));
        }
        Noise::with_power(reference_power * 10f64.powf(-snr_db / 10.0))
    }

    pub fn power(&self) -> f64 {
        self.power
    }
}

/// Circularly-symmetric complex Gaussian samples with variance `power`.
fn complex_gaussian(rng: &mut ChaCha8Rng, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Received spectrum at the `Q` sounding subcarriers.
///
/// The repeated symbol is evaluated on the oversampled grid, the channel and
/// RF chain act on the occupied bins, noise hits every bin, and every
/// `repetitions`-th bin is kept (normalised back to one symbol).
pub fn simulate_reception(
    waveform: &SoundingWaveform,
    ctf: &[Complex64],
    calibration: &CalibrationFunction,
    noise: Noise,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let q = waveform.subcarriers;
    if ctf.len() != q || calibration.len() != q {
        return Err(RisError::invalid(format!(
            "length mismatch: waveform {q}, CTF {}, calibration {}",
            ctf.len(),
            calibration.len()
        )));
    }
    let r = waveform.repetitions;
    let mut grid = waveform.oversampled_spectrum();
    for i in 0..q {
        grid[r * i] *= calibration.response[i] * ctf[i];
    }
    if noise.power > 0.0 {
        // Kept bins are scaled by 1/r, so a bin variance of r²σ² leaves σ²
        // per subcarrier.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bin_power = noise.power * (r * r) as f64;
        for v in grid.iter_mut() {
            *v += complex_gaussian(&mut rng, bin_power);
        }
    }
    let scale = 1.0 / r as f64;
    Ok((0..q).map(|i| grid[r * i] * scale).collect())
}

/// `Ĥ[q] = Y[q] / (X[q]·Ĥ_RF[q])`.
pub fn estimate_ctf(
    received: &[Complex64],
    waveform: &SoundingWaveform,
    calibration: &CalibrationFunction,
) -> Result<Vec<Complex64>> {
    let q = waveform.subcarriers;
    if received.len() != q || calibration.len() != q {
        return Err(RisError::invalid("received spectrum or calibration has wrong length"));
    }
    received
        .iter()
        .zip(waveform.weights.iter().zip(&calibration.response))
        .enumerate()
        .map(|(i, (y, (x, h)))| {
            let d = x * h;
            if d.norm() == 0.0 {
                return Err(RisError::Calibration(format!("zero denominator at subcarrier {i}")));
            }
            Ok(y / d)
        })
        .collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn unitary_transform(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    if n == 0 {
        return Vec::new();
    }
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    let mut buf = input.to_vec();
    fft.process(&mut buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= s);
    buf
}

/// Unitary inverse DFT of the CTF.
pub fn ctf_to_cir(ctf: &[Complex64]) -> Vec<Complex64> {
    unitary_transform(ctf, true)
}

/// Unitary forward DFT, inverse of [`ctf_to_cir`].
pub fn cir_to_ctf(cir: &[Complex64]) -> Vec<Complex64> {
    unitary_transform(cir, false)
}

/// Inclusive CIR support `[n1, n2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CirWindow {
    pub n1: usize,
    pub n2: usize,
}

impl CirWindow {
    pub fn full(len: usize) -> Self {
        CirWindow {
            n1: 0,
            n2: len.saturating_sub(1),
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if !(self.n1 <= self.n2 && self.n2 < len) {
            return Err(RisError::invalid(format!(
                "CIR window [{}, {}] invalid for length {len}",
                self.n1, self.n2
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.n2 - self.n1 + 1
    }
}

/// `Σ_{n=n1}^{n2} |h_i[n] − h_det[n]|²`.
pub fn field_pattern_power(
    cir: &[Complex64],
    deterministic: &[Complex64],
    window: CirWindow,
) -> Result<f64> {
    if cir.len() != deterministic.len() {
        return Err(RisError::invalid("CIR and deterministic part differ in length"));
    }
    window.validate(cir.len())?;
    Ok((window.n1..=window.n2)
        .map(|n| (cir[n] - deterministic[n]).norm_sqr())
        .sum())
}

/// Element-wise mean of calibration CIRs.
pub fn mean_cir<'a>(cirs: impl IntoIterator<Item = &'a [Complex64]>) -> Result<Vec<Complex64>> {
    let mut iter = cirs.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| RisError::Calibration("no calibration records".into()))?;
    // Running mean: identical records reproduce themselves bit for bit, so
    // a noise-free all-OFF capture minus h_det is exactly zero.
    let mut mean = first.to_vec();
    let mut count = 1usize;
    for c in iter {
        if c.len() != mean.len() {
            return Err(RisError::Calibration("calibration CIR lengths differ".into()));
        }
        count += 1;
        let w = 1.0 / count as f64;
        mean.iter_mut().zip(c).for_each(|(m, x)| *m += (x - *m) * w);
    }
    Ok(mean)
}

/// One sounding capture together with its processed estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundingRecord {
    pub config_id: u32,
    pub direction: Direction,
    pub received: Vec<Complex64>,
    pub ctf: Vec<Complex64>,
    pub cir: Vec<Complex64>,
    pub noise_power: f64,
}

impl SoundingRecord {
    /// Estimates CTF and CIR from a received spectrum.
    pub fn process(
        config_id: u32,
        direction: Direction,
        received: Vec<Complex64>,
        noise_power: f64,
        waveform: &SoundingWaveform,
        calibration: &CalibrationFunction,
    ) -> Result<Self> {
        let ctf = estimate_ctf(&received, waveform, calibration)?;
        let cir = ctf_to_cir(&ctf);
        Ok(SoundingRecord {
            config_id,
            direction,
            received,
            ctf,
            cir,
            noise_power,
        })
    }
}

/// splitmix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise seed for one capture; independent of evaluation order.
pub fn point_seed(campaign_seed: u64, config_id: u32, direction: &Direction, repetition: u32) -> u64 {
    let mut h = mix64(campaign_seed);
    for v in [
        config_id as u64,
        direction.azimuth.to_bits(),
        direction.elevation.to_bits(),
        repetition as u64,
    ] {
        h = mix64(h ^ v);
    }
    h
}

/// Power versus outgoing direction for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPattern {
    pub points: Vec<PatternPoint>,
    pub grid_spacing: f64,
    pub extent: f64,
    /// Angular radius excluded around the TX direction, degrees.
    pub excluded_radius: Option<f64>,
    pub tx_direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternPoint {
    pub direction: Direction,
    pub power: f64,
}

impl FieldPattern {
    /// Strongest point; the first one in grid order wins ties.
    pub fn argmax(&self) -> Option<PatternPoint> {
        self.points.iter().copied().fold(None, |best, p| match best {
            Some(b) if b.power >= p.power => Some(b),
            _ => Some(p),
        })
    }

    pub fn max_power(&self) -> f64 {
        self.argmax().map_or(0.0, |p| p.power)
    }

    /// Power at a grid direction, if present.
    pub fn power_at(&self, d: &Direction) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.direction == *d)
            .map(|p| p.power)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Row-major grid over `±extent` degrees: elevation outer, azimuth inner,
/// both ascending.
pub fn direction_grid(spacing: f64, extent: f64) -> Result<Vec<Direction>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(RisError::invalid(format!("grid spacing must be > 0, got {spacing}")));
    }
    if !(extent >= 0.0 && extent <= 90.0) {
        return Err(RisError::invalid(format!("grid extent must be in [0, 90], got {extent}")));
    }
    let n = (2.0 * extent / spacing + 1e-9).floor() as usize + 1;
    let axis: Vec<f64> = (0..n).map(|i| -extent + i as f64 * spacing).collect();
    Ok(axis
        .iter()
        .flat_map(|&el| {
            axis.iter().map(move |&az| Direction {
                azimuth: az,
                elevation: el,
            })
        })
        .collect())
}

/// How each pattern point is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternPath {
    /// Received power at the carrier only.
    Narrowband,
    /// `Σ_q |H(f_q)|²` straight from the channel model; equals the noise-free
    /// sounder chain with a full CIR window.
    Wideband,
    /// Full synthetic measurement chain.
    Sounder,
}

/// Everything fixed across one pattern scan.
#[derive(Debug, Clone)]
pub struct ScanSetup {
    pub array: RisArray,
    /// TX placement and RIS pose; RX is moved across the grid.
    pub scene: Scene,
    pub model: ReflectionModel,
    pub budget: LinkBudget,
    pub waveform: SoundingWaveform,
    pub calibration: CalibrationFunction,
    pub static_component: Option<StaticComponent>,
    pub window: CirWindow,
    pub rx_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    None,
    /// Fixed noise power per subcarrier, watts.
    Absolute(f64),
    /// SNR relative to the configuration's received power at the template
    /// RX position (its design target).
    SnrAtTarget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub grid_spacing: f64,
    pub extent: f64,
    /// Skip directions within this angle of the TX, degrees.
    pub exclude_tx_cone: Option<f64>,
    pub path: PatternPath,
    pub noise: NoiseLevel,
    pub seed: u64,
    pub config_id: u32,
    /// All-OFF captures averaged into the deterministic CIR per direction.
    pub calibration_records: usize,
}

/// Smallest TX–RX angle the positioning setup can reach, degrees.
pub const MIN_TX_RX_ANGLE_DEG: f64 = 8.0;

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid_spacing: 1.5,
            extent: 45.0,
            exclude_tx_cone: Some(MIN_TX_RX_ANGLE_DEG),
            path: PatternPath::Narrowband,
            noise: NoiseLevel::None,
            seed: 0,
            config_id: 0,
            calibration_records: 10,
        }
    }
}

impl ScanSetup {
    pub fn standard() -> Self {
        let array = RisArray::standard();
        let scene = Scene::from_directions(
            Direction::new(-25.0, 0.0).expect("valid"),
            5.0,
            Direction::new(15.0, 30.0).expect("valid"),
            5.0,
        )
        .expect("valid scene");
        let waveform = SoundingWaveform::standard();
        ScanSetup {
            calibration: CalibrationFunction::unity(waveform.subcarriers()),
            window: CirWindow::full(waveform.subcarriers()),
            array,
            scene,
            model: ReflectionModel::standard(),
            budget: LinkBudget::default(),
            waveform,
            static_component: None,
            rx_range: 5.0,
        }
    }

    fn true_ctf(&self, scene: &Scene, config: &RisConfiguration) -> Result<Vec<Complex64>> {
        let freqs = self.waveform.frequencies();
        let ctf = synthetic_ctf(&self.array, scene, config, &self.model, &self.budget, &freqs)?;
        match &self.static_component {
            Some(c) => add_static_component(&ctf, &freqs, scene, c),
            None => Ok(ctf),
        }
    }

    /// Simulates one capture with RX at `scene`'s RX position.
    pub fn capture(
        &self,
        scene: &Scene,
        config: &RisConfiguration,
        config_id: u32,
        direction: Direction,
        noise: Noise,
        seed: u64,
    ) -> Result<SoundingRecord> {
        let ctf = self.true_ctf(scene, config)?;
        let y = simulate_reception(&self.waveform, &ctf, &self.calibration, noise, seed)?;
        SoundingRecord::process(config_id, direction, y, noise.power(), &self.waveform, &self.calibration)
    }

    fn noise_for(&self, config: &RisConfiguration, level: NoiseLevel) -> Result<Noise> {
        match level {
            NoiseLevel::None => Ok(Noise::NONE),
            NoiseLevel::Absolute(p) => Noise::with_power(p),
            NoiseLevel::SnrAtTarget(snr) => {
                let p = received_power(&self.array, &self.scene, config, &self.model, &self.budget)?;
                Noise::from_snr(snr, p)
            }
        }
    }
}

/// Field pattern of `config` over the scan grid.
pub fn scan_pattern(
    setup: &ScanSetup,
    config: &RisConfiguration,
    options: &ScanOptions,
) -> Result<FieldPattern> {
    setup.window.validate(setup.waveform.subcarriers())?;
    let tx_direction = setup.scene.tx_direction();
    let directions: Vec<Direction> = direction_grid(options.grid_spacing, options.extent)?
        .into_iter()
        .filter(|d| match options.exclude_tx_cone {
            Some(cone) => d.separation(&tx_direction) >= cone,
            None => true,
        })
        .collect();
    let noise = setup.noise_for(config, options.noise)?;
    let all_off = RisConfiguration::all_off(setup.array.len());
    let freqs = setup.waveform.frequencies();

    let points = directions
        .par_iter()
        .map(|d| {
            let scene = setup.scene.with_rx_direction(*d, setup.rx_range)?;
            let power = match options.path {
                PatternPath::Narrowband => {
                    received_power(&setup.array, &scene, config, &setup.model, &setup.budget)?
                }
                PatternPath::Wideband => synthetic_ctf(
                    &setup.array,
                    &scene,
                    config,
                    &setup.model,
                    &setup.budget,
                    &freqs,
                )?
                .iter()
                .map(|h| h.norm_sqr())
                .sum(),
                PatternPath::Sounder => {
                    let seed = point_seed(options.seed, options.config_id, d, 0);
                    let rec = setup.capture(&scene, config, options.config_id, *d, noise, seed)?;
                    let cal: Vec<SoundingRecord> = (0..options.calibration_records)
                        .map(|i| {
                            let s = point_seed(options.seed, u32::MAX - i as u32, d, 0);
                            setup.capture(&scene, &all_off, 0, *d, noise, s)
                        })
                        .collect::<Result<_>>()?;
                    let h_det = if cal.is_empty() {
                        vec![Complex64::new(0.0, 0.0); rec.cir.len()]
                    } else {
                        mean_cir(cal.iter().map(|r| r.cir.as_slice()))?
                    };
                    field_pattern_power(&rec.cir, &h_det, setup.window)?
                }
            };
            Ok(PatternPoint { direction: *d, power })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FieldPattern {
        points,
        grid_spacing: options.grid_spacing,
        extent: options.extent,
        excluded_radius: options.exclude_tx_cone,
        tx_direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_subcarrier_waveform() {
        let w = generate_waveform(1, 500e3, 26e9, 0).unwrap();
        assert_eq!(w.weights(), &[Complex64::new(1.0, 0.0)]);
        assert!(generate_waveform(4, 500e3, 26e9, 0).is_err());
        assert!(generate_waveform(3, 0.0, 26e9, 0).is_err());
    }

    #[test]
    fn default_waveform_is_flat_with_155_5_mhz() {
        let w = SoundingWaveform::standard();
        assert_eq!(w.subcarriers(), 311);
        assert!(w.weights().iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
        assert!((w.bandwidth() - 155.5e6).abs() < 1e-3);
        assert!((w.period() - 2e-6).abs() < 1e-18);
        let f = w.frequencies();
        assert_eq!(f[155], 26e9);
    }

    #[test]
    fn five_tone_weights_by_hand() {
        let w = generate_waveform(5, 1.0, 10.0, 0).unwrap();
        for (i, q) in (-2i32..=2).enumerate() {
            let want = Complex64::new(0.0, PI * (q * q) as f64 / 5.0).exp();
            assert!((w.weights()[i] - want).norm() < 1e-15);
        }
    }

    #[test]
    fn random_phase_law_is_seeded() {
        let a = SoundingWaveform::new(7, 1.0, 10.0, 42, WeightLaw::RandomPhase, 2).unwrap();
        let b = SoundingWaveform::new(7, 1.0, 10.0, 42, WeightLaw::RandomPhase, 2).unwrap();
        let c = SoundingWaveform::new(7, 1.0, 10.0, 43, WeightLaw::RandomPhase, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.weights(), c.weights());
        assert!(a.weights().iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unit_channel_returns_weights() {
        let w = SoundingWaveform::standard();
        let h = vec![Complex64::new(1.0, 0.0); 311];
        let y = simulate_reception(&w, &h, &CalibrationFunction::unity(311), Noise::NONE, 0).unwrap();
        assert_eq!(y, w.weights().to_vec());
        let est = estimate_ctf(&y, &w, &CalibrationFunction::unity(311)).unwrap();
        assert!(est.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn oversampled_grid_has_empty_odd_bins() {
        let w = SoundingWaveform::standard();
        let g = w.oversampled_spectrum();
        assert_eq!(g.len(), 622);
        assert!(g.iter().skip(1).step_by(2).all(|v| v.norm() == 0.0));
        assert!(g.iter().step_by(2).all(|v| v.norm() > 0.0));
    }

    #[test]
    fn noise_only_variance() {
        let w = SoundingWaveform::standard();
        let zero = vec![Complex64::new(0.0, 0.0); 311];
        let cal = CalibrationFunction::unity(311);
        let noise = Noise::with_power(2.5e-9).unwrap();
        let mut total = 0.0;
        for t in 0..100u64 {
            let y = simulate_reception(&w, &zero, &cal, noise, t).unwrap();
            total += y.iter().map(|v| v.norm_sqr()).sum::<f64>() / 311.0;
        }
        let var = total / 100.0;
        assert!((var / 2.5e-9 - 1.0).abs() < 0.1, "variance ratio {}", var / 2.5e-9);
    }

    #[test]
    fn infinite_snr_is_noiseless() {
        assert_eq!(Noise::from_snr(f64::INFINITY, 1.0).unwrap(), Noise::NONE);
        let n = Noise::from_snr(30.0, 2.0).unwrap();
        assert!((n.power() - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_rejected() {
        let w = SoundingWaveform::standard();
        let r = simulate_reception(&w, &[Complex64::new(1.0, 0.0)], &CalibrationFunction::unity(311), Noise::NONE, 0);
        assert!(matches!(r, Err(RisError::InvalidParameter(_))));
    }

    #[test]
    fn calibration_rejects_zero() {
        assert!(matches!(
            CalibrationFunction::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]),
            Err(RisError::Calibration(_))
        ));
    }

    #[test]
    fn back_to_back_calibration_recovers_rf_chain() {
        let w = generate_waveform(9, 1e6, 26e9, 0).unwrap();
        let rf: Vec<Complex64> = (0..9)
            .map(|i| Complex64::from_polar(1.0 + 0.05 * i as f64, 0.1 * i as f64))
            .collect();
        let atten = 1e-3;
        let y = simulate_reception(
            &w,
            &vec![Complex64::new(atten, 0.0); 9],
            &CalibrationFunction::new(rf.clone()).unwrap(),
            Noise::NONE,
            0,
        )
        .unwrap();
        let cal = CalibrationFunction::from_back_to_back(&w, &y, atten).unwrap();
        for (a, b) in cal.response().iter().zip(&rf) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_ctf_is_scaled_delta() {
        let h = ctf_to_cir(&vec![Complex64::new(1.0, 0.0); 311]);
        assert!((h[0].re - 311f64.sqrt()).abs() < 1e-10);
        assert!(h[1..].iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn linear_phase_shifts_the_peak() {
        let q = 311usize;
        let d = 17usize;
        let ctf: Vec<Complex64> = (0..q)
            .map(|i| Complex64::from_polar(1.0, -2.0 * PI * (i * d) as f64 / q as f64))
            .collect();
        let h = ctf_to_cir(&ctf);
        let peak = (0..q).max_by(|&a, &b| h[a].norm().total_cmp(&h[b].norm())).unwrap();
        assert_eq!(peak, d);
    }

    #[test]
    fn pattern_power_examples() {
        let h = vec![Complex64::new(0.5, -0.25); 8];
        assert_eq!(field_pattern_power(&h, &h, CirWindow::full(8)).unwrap(), 0.0);
        let mut delta = vec![Complex64::new(0.0, 0.0); 8];
        delta[3] = Complex64::new(0.6, 0.0);
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        let p = field_pattern_power(&delta, &zero, CirWindow { n1: 2, n2: 4 }).unwrap();
        assert!((p - 0.36).abs() < 1e-15);
        assert!(field_pattern_power(&delta, &zero, CirWindow { n1: 4, n2: 8 }).is_err());
        assert!(field_pattern_power(&delta, &zero, CirWindow { n1: 5, n2: 4 }).is_err());
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(direction_grid(5.0, 45.0).unwrap().len(), 361);
        assert_eq!(direction_grid(1.5, 45.0).unwrap().len(), 61 * 61);
        assert_eq!(direction_grid(15.0, 45.0).unwrap().len(), 49);
        let g = direction_grid(45.0, 45.0).unwrap();
        assert_eq!(g[1], Direction { azimuth: 0.0, elevation: -45.0 });
        assert!(direction_grid(0.0, 45.0).is_err());
    }

    #[test]
    fn seeds_differ_per_point() {
        let d = Direction { azimuth: 1.5, elevation: 0.0 };
        let e = Direction { azimuth: 0.0, elevation: 1.5 };
        assert_ne!(point_seed(1, 2, &d, 0), point_seed(1, 2, &e, 0));
        assert_ne!(point_seed(1, 2, &d, 0), point_seed(1, 3, &d, 0));
        assert_eq!(point_seed(9, 2, &d, 1), point_seed(9, 2, &d, 1));
    }
}
