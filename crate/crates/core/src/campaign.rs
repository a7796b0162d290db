//! Campaign orchestration: scenario defaults, configuration sequences,
//! passive/active sweeps, persisted records, patterns and reports.
//!
//! Files written by [`run_campaign`] into the output directory:
//!
//! - `plan.json`: the plan as run
//! - `sequence_<mode>.json`: ordered configuration list
//! - `records_<mode>.bin`: sounder captures (see [`crate::records`])
//! - `pattern_<mode>_az<φ>_el<θ>.csv` and `.json`: field patterns
//! - `report.json`: fast-path comparison; `report_measured.json`: sounder comparison
//! - `manifest.json`: plan hash, counts, checksums, completion flag

use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamform::{phase_profile, select_active, select_passive, PassiveStateSet};
use crate::channel::{
    power_to_db, received_power, LinkBudget, Mode, ReflectionModel, RisConfiguration, StaticComponent,
};
use crate::error::{Result, RisError};
use crate::geometry::{Direction, RisArray, Scene, DEFAULT_PATTERN_EXPONENT};
use crate::records::{RecordFile, RecordHeader, RecordKind, StoredRecord};
use crate::sounder::{
    direction_grid, field_pattern_power, mean_cir, point_seed, scan_pattern, CalibrationFunction,
    CirWindow, FieldPattern, Noise, NoiseLevel, PatternPath, ScanOptions, ScanSetup, SoundingRecord,
    SoundingWaveform, MIN_TX_RX_ANGLE_DEG,
};

pub const PLAN_VERSION: u32 = 1;

/// Reference scenario parameters.
#[derive(Debug, Clone)]
pub struct DefaultScenario {
    pub array: RisArray,
    /// TX at (−25°, 0°), 5 m; RX at the (15°, 30°) target, 5 m.
    pub scene: Scene,
    pub model: ReflectionModel,
    pub budget: LinkBudget,
    pub waveform: SoundingWaveform,
}

pub fn build_default_scenario() -> DefaultScenario {
    let setup = ScanSetup::standard();
    DefaultScenario {
        array: setup.array,
        scene: setup.scene,
        model: setup.model,
        budget: setup.budget,
        waveform: setup.waveform,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Degrees between neighbouring points.
    pub spacing: f64,
    /// Grid covers `±extent` degrees in azimuth and elevation.
    pub extent: f64,
}

impl GridSpec {
    pub fn directions(&self) -> Result<Vec<Direction>> {
        direction_grid(self.spacing, self.extent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Passive,
    Active,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::Passive => vec![Mode::Passive],
            ModeSelection::Active => vec![Mode::Active],
            ModeSelection::Both => vec![Mode::Passive, Mode::Active],
        }
    }
}

impl std::str::FromStr for ModeSelection {
    type Err = RisError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passive" => Ok(ModeSelection::Passive),
            "active" => Ok(ModeSelection::Active),
            "both" => Ok(ModeSelection::Both),
            _ => Err(RisError::invalid(format!("unknown mode selection '{s}'"))),
        }
    }
}

/// Versioned description of one campaign run. Missing JSON fields take the
/// defaults of [`CampaignPlan::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignPlan {
    pub version: u32,
    pub tx_direction: Direction,
    pub tx_range: f64,
    pub rx_range: f64,
    pub steering: GridSpec,
    pub scan: GridSpec,
    /// All-OFF entries; the first half (rounded up) opens the sequence, the
    /// rest closes it.
    pub calibration_count: usize,
    pub modes: ModeSelection,
    pub seed: u64,
    /// SNR at each steering target; `None` is noise-free.
    pub snr_db: Option<f64>,
    /// Run the full sounder chain and write record files.
    pub sounder: bool,
    /// Replaces the steering grid with an explicit target list.
    pub targets: Option<Vec<Direction>>,
    /// Targets whose full field pattern is scanned and exported.
    pub pattern_targets: Vec<Direction>,
    pub pattern_path: PatternPath,
    /// Angular radius around the TX left out of pattern scans, degrees.
    pub exclude_tx_cone: Option<f64>,
    /// Steering captures per target.
    pub repetitions_per_point: u32,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    pub reflection_model: ReflectionModel,
    pub pattern_exponent: f64,
    pub static_component: Option<StaticComponent>,
    /// CIR window for the field-pattern power; `None` is the full support.
    pub window: Option<CirWindow>,
}

impl Default for CampaignPlan {
    fn default() -> Self {
        CampaignPlan {
            version: PLAN_VERSION,
            tx_direction: Direction {
                azimuth: -25.0,
                elevation: 0.0,
            },
            tx_range: 5.0,
            rx_range: 5.0,
            steering: GridSpec {
                spacing: 5.0,
                extent: 45.0,
            },
            scan: GridSpec {
                spacing: 1.5,
                extent: 45.0,
            },
            calibration_count: 10,
            modes: ModeSelection::Both,
            seed: 0,
            snr_db: None,
            sounder: true,
            targets: None,
            pattern_targets: vec![Direction {
                azimuth: 15.0,
                elevation: 30.0,
            }],
            pattern_path: PatternPath::Narrowband,
            exclude_tx_cone: Some(MIN_TX_RX_ANGLE_DEG),
            repetitions_per_point: 1,
            workers: None,
            reflection_model: ReflectionModel::standard(),
            pattern_exponent: DEFAULT_PATTERN_EXPONENT,
            static_component: None,
            window: None,
        }
    }
}

impl CampaignPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: CampaignPlan =
            serde_json::from_str(text).map_err(|e| RisError::invalid(format!("campaign plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RisError::io(path, e))?;
        CampaignPlan::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PLAN_VERSION {
            return Err(RisError::invalid(format!("unsupported plan version {}", self.version)));
        }
        self.tx_direction.validate()?;
        for (name, r) in [("tx_range", self.tx_range), ("rx_range", self.rx_range)] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(RisError::invalid(format!("{name} must be > 0, got {r}")));
            }
        }
        self.steering.directions()?;
        self.scan.directions()?;
        if let Some(snr) = self.snr_db {
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return Err(RisError::invalid(format!("snr_db must be a number, got {snr}")));
            }
        }
        for d in self.targets.iter().flatten().chain(&self.pattern_targets) {
            d.validate()?;
        }
        if let Some(cone) = self.exclude_tx_cone {
            if !(cone >= 0.0) {
                return Err(RisError::invalid("exclude_tx_cone must be >= 0"));
            }
        }
        if self.repetitions_per_point == 0 {
            return Err(RisError::invalid("repetitions_per_point must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(RisError::invalid("workers must be >= 1"));
        }
        self.reflection_model.validate()?;
        let setup = self.scan_setup()?;
        setup.window.validate(setup.waveform.subcarriers())?;
        Ok(())
    }

    /// Steering targets in sequence order.
    pub fn steering_targets(&self) -> Result<Vec<Direction>> {
        match &self.targets {
            Some(t) => Ok(t.clone()),
            None => self.steering.directions(),
        }
    }

    /// Scan setup with RX at the first pattern target (or boresight).
    pub fn scan_setup(&self) -> Result<ScanSetup> {
        let mut setup = ScanSetup::standard();
        setup.array = setup.array.with_pattern_exponent(self.pattern_exponent)?;
        setup.model = self.reflection_model;
        setup.rx_range = self.rx_range;
        let rx = self.pattern_targets.first().copied().unwrap_or(Direction {
            azimuth: 0.0,
            elevation: 0.0,
        });
        setup.scene = Scene::from_directions(self.tx_direction, self.tx_range, rx, self.rx_range)?;
        setup.static_component = self.static_component;
        if let Some(w) = self.window {
            setup.window = w;
        }
        Ok(setup)
    }

    fn calibration_split(&self) -> (usize, usize) {
        let head = self.calibration_count.div_ceil(2);
        (head, self.calibration_count - head)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "direction")]
pub enum SequenceTarget {
    Steering(Direction),
    Calibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub config_id: u32,
    pub target: SequenceTarget,
    pub configuration: RisConfiguration,
}

/// Configuration designed for `target` from the TX placement in `scene`.
pub fn design_configuration(
    array: &RisArray,
    scene: &Scene,
    model: &ReflectionModel,
    mode: Mode,
    target: Direction,
    rx_range: f64,
) -> Result<RisConfiguration> {
    let profile = phase_profile(array, &scene.with_rx_direction(target, rx_range)?)?;
    Ok(match mode {
        Mode::Passive => select_passive(&profile, &PassiveStateSet::from_model(model)?),
        Mode::Active => select_active(&profile),
    })
}

/// Calibration entries at both ends, steering entries in target order, ids
/// dense from 1.
pub fn generate_sequence(
    plan: &CampaignPlan,
    mode: Mode,
    array: &RisArray,
    scene: &Scene,
) -> Result<Vec<SequenceEntry>> {
    let targets = plan.steering_targets()?;
    let steering = targets
        .par_iter()
        .map(|t| design_configuration(array, scene, &plan.reflection_model, mode, *t, plan.rx_range))
        .collect::<Result<Vec<_>>>()?;
    let (head, tail) = plan.calibration_split();
    let calibration = || SequenceEntry {
        config_id: 0,
        target: SequenceTarget::Calibration,
        configuration: RisConfiguration::all_off(array.len()),
    };
    let mut out: Vec<SequenceEntry> = (0..head).map(|_| calibration()).collect();
    out.extend(targets.iter().zip(steering).map(|(t, c)| SequenceEntry {
        config_id: 0,
        target: SequenceTarget::Steering(*t),
        configuration: c,
    }));
    out.extend((0..tail).map(|_| calibration()));
    for (i, e) in out.iter_mut().enumerate() {
        e.config_id = u32::try_from(i + 1).map_err(|_| RisError::Capacity {
            what: "configuration count",
            got: i + 1,
            limit: u32::MAX as usize,
        })?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetComparison {
    pub target: Direction,
    pub passive_config_id: Option<u32>,
    pub active_config_id: Option<u32>,
    pub passive_peak_db: Option<f64>,
    pub active_peak_db: Option<f64>,
    /// `active_peak_db − passive_peak_db`.
    pub gain_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSummary {
    pub count: usize,
    pub min_db: f64,
    pub mean_db: f64,
    pub median_db: f64,
}

impl GainSummary {
    /// `None` when no finite gains are available.
    pub fn from_gains(gains: &[f64]) -> Option<Self> {
        let mut g: Vec<f64> = gains.iter().copied().filter(|x| x.is_finite()).collect();
        if g.is_empty() {
            return None;
        }
        g.sort_by(f64::total_cmp);
        let n = g.len();
        let median = if n % 2 == 1 {
            g[n / 2]
        } else {
            0.5 * (g[n / 2 - 1] + g[n / 2])
        };
        Some(GainSummary {
            count: n,
            min_db: g[0],
            mean_db: g.iter().sum::<f64>() / n as f64,
            median_db: median,
        })
    }
}

/// Peak power is the power delivered to the steering target itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `simulation` (carrier-frequency model) or `measurement` (sounder chain).
    pub source: String,
    pub targets: Vec<TargetComparison>,
    pub calibration_config_ids: Vec<u32>,
    pub summary: Option<GainSummary>,
}

/// Per-mode peak values keyed by target, in target order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePeaks {
    pub mode: Mode,
    pub peaks: Vec<(u32, Direction, f64)>,
    pub calibration_ids: Vec<u32>,
}

impl ComparisonReport {
    pub fn build(source: &str, passive: Option<&ModePeaks>, active: Option<&ModePeaks>) -> Self {
        let mut targets: Vec<TargetComparison> = Vec::new();
        let mut slot = |d: Direction| -> usize {
            match targets.iter().position(|t| t.target == d) {
                Some(i) => i,
                None => {
                    targets.push(TargetComparison {
                        target: d,
                        passive_config_id: None,
                        active_config_id: None,
                        passive_peak_db: None,
                        active_peak_db: None,
                        gain_db: None,
                    });
                    targets.len() - 1
                }
            }
        };
        let mut idx_p = Vec::new();
        for &(id, d, p) in passive.map_or(&[][..], |m| &m.peaks) {
            idx_p.push((slot(d), id, p));
        }
        let mut idx_a = Vec::new();
        for &(id, d, p) in active.map_or(&[][..], |m| &m.peaks) {
            idx_a.push((slot(d), id, p));
        }
        for (i, id, p) in idx_p {
            targets[i].passive_config_id = Some(id);
            targets[i].passive_peak_db = Some(power_to_db(p));
        }
        for (i, id, p) in idx_a {
            targets[i].active_config_id = Some(id);
            targets[i].active_peak_db = Some(power_to_db(p));
        }
        for t in &mut targets {
            if let (Some(p), Some(a)) = (t.passive_peak_db, t.active_peak_db) {
                t.gain_db = Some(a - p);
            }
        }
        let gains: Vec<f64> = targets.iter().filter_map(|t| t.gain_db).collect();
        let mut calibration_config_ids: Vec<u32> = passive
            .into_iter()
            .chain(active)
            .flat_map(|m| m.calibration_ids.iter().copied())
            .collect();
        calibration_config_ids.sort_unstable();
        calibration_config_ids.dedup();
        ComparisonReport {
            source: source.to_string(),
            targets,
            calibration_config_ids,
            summary: GainSummary::from_gains(&gains),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Carrier-frequency received power of every steering entry at its target.
pub fn simulated_peaks(
    setup: &ScanSetup,
    mode: Mode,
    sequence: &[SequenceEntry],
) -> Result<ModePeaks> {
    let peaks = sequence
        .par_iter()
        .filter_map(|e| match e.target {
            SequenceTarget::Steering(d) => Some((e, d)),
            SequenceTarget::Calibration => None,
        })
        .map(|(e, d)| {
            let scene = setup.scene.with_rx_direction(d, setup.rx_range)?;
            let p = received_power(&setup.array, &scene, &e.configuration, &setup.model, &setup.budget)?;
            Ok((e.config_id, d, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModePeaks {
        mode,
        peaks,
        calibration_ids: calibration_ids(sequence),
    })
}

fn calibration_ids(sequence: &[SequenceEntry]) -> Vec<u32> {
    sequence
        .iter()
        .filter(|e| e.target == SequenceTarget::Calibration)
        .map(|e| e.config_id)
        .collect()
}

/// Simulates the sounder captures of one sweep. Steering entries are captured
/// at their target `repetitions` times; each calibration entry is captured
/// once at every steering target. Records are ordered by config id, then
/// target, then repetition.
pub fn capture_sequence(
    setup: &ScanSetup,
    mode: Mode,
    sequence: &[SequenceEntry],
    snr_db: Option<f64>,
    seed: u64,
    repetitions: u32,
) -> Result<RecordFile> {
    let targets: Vec<(Direction, &RisConfiguration)> = sequence
        .iter()
        .filter_map(|e| match e.target {
            SequenceTarget::Steering(d) => Some((d, &e.configuration)),
            SequenceTarget::Calibration => None,
        })
        .collect();
    // Noise is fixed per target from the steering configuration's power there.
    let noise: Vec<Noise> = targets
        .par_iter()
        .map(|(d, config)| match snr_db {
            None => Ok(Noise::NONE),
            Some(snr) => {
                let scene = setup.scene.with_rx_direction(*d, setup.rx_range)?;
                let p = received_power(&setup.array, &scene, config, &setup.model, &setup.budget)?;
                Noise::from_snr(snr, p)
            }
        })
        .collect::<Result<_>>()?;

    let mut jobs: Vec<(u32, RecordKind, &RisConfiguration, usize, u32)> = Vec::new();
    for e in sequence {
        match e.target {
            SequenceTarget::Steering(d) => {
                let t = targets.iter().position(|(td, _)| *td == d).expect("steering target listed");
                for r in 0..repetitions {
                    jobs.push((e.config_id, RecordKind::Steering, &e.configuration, t, r));
                }
            }
            SequenceTarget::Calibration => {
                for t in 0..targets.len() {
                    jobs.push((e.config_id, RecordKind::Calibration, &e.configuration, t, 0));
                }
            }
        }
    }
    let records = jobs
        .par_iter()
        .map(|&(id, kind, config, t, r)| {
            let d = targets[t].0;
            let scene = setup.scene.with_rx_direction(d, setup.rx_range)?;
            let rec = setup.capture(&scene, config, id, d, noise[t], point_seed(seed, id, &d, r))?;
            Ok(StoredRecord {
                config_id: id,
                kind,
                direction: d,
                noise_power: rec.noise_power,
                received: rec.received,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecordFile {
        header: RecordHeader::new(mode, &setup.waveform, &setup.calibration, seed),
        records,
    })
}

/// Field-pattern power of every steering target in a record file, after
/// subtracting the mean all-OFF CIR captured at the same target.
/// Repetitions are averaged.
pub fn measured_peaks(file: &RecordFile, window: Option<CirWindow>) -> Result<ModePeaks> {
    let waveform = file.header.waveform()?;
    let calibration: CalibrationFunction = file.header.calibration_function()?;
    let window = window.unwrap_or(CirWindow::full(waveform.subcarriers()));
    let cirs: Vec<Vec<Complex64>> = file
        .records
        .par_iter()
        .map(|r| {
            SoundingRecord::process(r.config_id, r.direction, r.received.clone(), r.noise_power, &waveform, &calibration)
                .map(|p| p.cir)
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<(u32, Direction)> = Vec::new();
    for r in file.records.iter().filter(|r| r.kind == RecordKind::Steering) {
        if !order.iter().any(|(id, d)| *id == r.config_id && *d == r.direction) {
            order.push((r.config_id, r.direction));
        }
    }
    let peaks = order
        .par_iter()
        .map(|&(id, d)| {
            let cal: Vec<&[Complex64]> = file
                .records
                .iter()
                .zip(&cirs)
                .filter(|(r, _)| r.kind == RecordKind::Calibration && r.direction == d)
                .map(|(_, c)| c.as_slice())
                .collect();
            let h_det = if cal.is_empty() {
                vec![Complex64::new(0.0, 0.0); waveform.subcarriers()]
            } else {
                mean_cir(cal)?
            };
            let powers: Vec<f64> = file
                .records
                .iter()
                .zip(&cirs)
                .filter(|(r, _)| r.kind == RecordKind::Steering && r.config_id == id && r.direction == d)
                .map(|(_, c)| field_pattern_power(c, &h_det, window))
                .collect::<Result<_>>()?;
            Ok((id, d, powers.iter().sum::<f64>() / powers.len() as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut calibration_ids: Vec<u32> = file
        .records
        .iter()
        .filter(|r| r.kind == RecordKind::Calibration)
        .map(|r| r.config_id)
        .collect();
    calibration_ids.dedup();
    Ok(ModePeaks {
        mode: file.header.mode,
        peaks,
        calibration_ids,
    })
}

/// Measurement comparison from one passive and one active record file.
pub fn compare_record_files(
    passive: &RecordFile,
    active: &RecordFile,
    window: Option<CirWindow>,
) -> Result<ComparisonReport> {
    if passive.header.mode != Mode::Passive || active.header.mode != Mode::Active {
        return Err(RisError::invalid("expected one passive and one active record file"));
    }
    let p = measured_peaks(passive, window)?;
    let a = measured_peaks(active, window)?;
    Ok(ComparisonReport::build("measurement", Some(&p), Some(&a)))
}

/// Writes `az_deg,el_deg,power_dB` rows in grid order, in dB relative to
/// `reference_power` (the pattern's own maximum when `None`). Zero power
/// is written as `-inf`. A JSON sidecar with the grid metadata is written
/// next to the CSV.
pub fn emit_pattern_csv(pattern: &FieldPattern, reference_power: Option<f64>, path: &Path) -> Result<()> {
    if pattern.is_empty() {
        return Err(RisError::invalid("cannot export an empty pattern"));
    }
    let reference = reference_power.unwrap_or_else(|| pattern.max_power());
    if !(reference > 0.0 && reference.is_finite()) {
        return Err(RisError::invalid(format!("reference power must be > 0, got {reference}")));
    }
    let mut text = String::from("az_deg,el_deg,power_dB\n");
    for p in &pattern.points {
        let db = 10.0 * (p.power / reference).log10();
        text.push_str(&format!("{},{},{}\n", p.direction.azimuth, p.direction.elevation, db));
    }
    write_file(path, text.as_bytes())?;
    let sidecar = PatternSidecar {
        rows: pattern.len(),
        order: "row-major: elevation outer, azimuth inner, ascending".into(),
        grid_spacing: pattern.grid_spacing,
        extent: pattern.extent,
        excluded_radius: pattern.excluded_radius,
        tx_direction: pattern.tx_direction,
        reference_power: reference,
    };
    write_file(
        &path.with_extension("json"),
        serde_json::to_string_pretty(&sidecar).expect("sidecar serialises").as_bytes(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSidecar {
    pub rows: usize,
    pub order: String,
    pub grid_spacing: f64,
    pub extent: f64,
    pub excluded_radius: Option<f64>,
    pub tx_direction: Direction,
    /// Linear power that maps to 0 dB.
    pub reference_power: f64,
}

/// Reads a pattern CSV back as `(direction, power_dB)` rows.
pub fn read_pattern_csv(path: &Path) -> Result<Vec<(Direction, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| RisError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("az_deg,el_deg,power_dB") {
        return Err(RisError::Format(format!("{}: missing pattern CSV header", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || RisError::Format(format!("{}: bad row {}", path.display(), i + 2));
            if cols.len() != 3 {
                return Err(bad());
            }
            let v: Vec<f64> = cols
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            Ok((
                Direction {
                    azimuth: v[0],
                    elevation: v[1],
                },
                v[2],
            ))
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| RisError::io(path, e))?;
    f.write_all(bytes).map_err(|e| RisError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub mode: Mode,
    pub steering: usize,
    pub calibration: usize,
    pub total: usize,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub plan_sha256: String,
    pub seed: u64,
    pub counts: Vec<ModeCounts>,
    pub outputs: Vec<OutputFile>,
    pub complete: bool,
}

/// In-memory results of a campaign run.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub manifest: Manifest,
    pub sequences: Vec<(Mode, Vec<SequenceEntry>)>,
    pub simulation: ComparisonReport,
    pub measurement: Option<ComparisonReport>,
    pub patterns: Vec<(Mode, Direction, FieldPattern)>,
}

fn fmt_angle(v: f64) -> String {
    format!("{v}")
}

/// Runs the plan and writes its outputs into `out_dir`. The manifest is
/// written first with `complete: false` and rewritten at the end.
pub fn run_campaign(plan: &CampaignPlan, out_dir: &Path) -> Result<CampaignOutcome> {
    plan.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = plan.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RisError::invalid(format!("worker pool: {e}")))?;
    pool.install(|| run_in_pool(plan, out_dir))
}

fn run_in_pool(plan: &CampaignPlan, out_dir: &Path) -> Result<CampaignOutcome> {
    std::fs::create_dir_all(out_dir).map_err(|e| RisError::io(out_dir, e))?;
    let plan_json = plan.to_json();
    let mut manifest = Manifest {
        version: PLAN_VERSION,
        plan_sha256: sha256_hex(plan_json.as_bytes()),
        seed: plan.seed,
        counts: Vec::new(),
        outputs: Vec::new(),
        complete: false,
    };
    let manifest_path = out_dir.join("manifest.json");
    let write_manifest = |m: &Manifest| {
        write_file(
            &manifest_path,
            serde_json::to_string_pretty(m).expect("manifest serialises").as_bytes(),
        )
    };
    write_manifest(&manifest)?;

    let emit = |manifest: &mut Manifest, name: String, bytes: &[u8]| -> Result<PathBuf> {
        let path = out_dir.join(&name);
        write_file(&path, bytes)?;
        manifest.outputs.push(OutputFile {
            file: name,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    };
    emit(&mut manifest, "plan.json".into(), plan_json.as_bytes())?;

    let setup = plan.scan_setup()?;
    let mut sequences = Vec::new();
    let mut sim_peaks = Vec::new();
    let mut meas_peaks = Vec::new();
    for mode in plan.modes.modes() {
        let seq = generate_sequence(plan, mode, &setup.array, &setup.scene)?;
        emit(
            &mut manifest,
            format!("sequence_{mode}.json"),
            serde_json::to_string_pretty(&seq).expect("sequence serialises").as_bytes(),
        )?;
        sim_peaks.push(simulated_peaks(&setup, mode, &seq)?);
        let steering = seq.iter().filter(|e| e.target != SequenceTarget::Calibration).count();
        let mut records = 0;
        if plan.sounder {
            let file = capture_sequence(&setup, mode, &seq, plan.snr_db, plan.seed, plan.repetitions_per_point)?;
            records = file.records.len();
            emit(&mut manifest, format!("records_{mode}.bin"), &file.to_bytes()?)?;
            meas_peaks.push(measured_peaks(&file, Some(setup.window))?);
        }
        manifest.counts.push(ModeCounts {
            mode,
            steering,
            calibration: seq.len() - steering,
            total: seq.len(),
            records,
        });
        sequences.push((mode, seq));
    }

    let pick = |peaks: &[ModePeaks], mode: Mode| peaks.iter().find(|p| p.mode == mode).cloned();
    let simulation = ComparisonReport::build(
        "simulation",
        pick(&sim_peaks, Mode::Passive).as_ref(),
        pick(&sim_peaks, Mode::Active).as_ref(),
    );
    emit(&mut manifest, "report.json".into(), simulation.to_json().as_bytes())?;
    let measurement = if plan.sounder {
        let r = ComparisonReport::build(
            "measurement",
            pick(&meas_peaks, Mode::Passive).as_ref(),
            pick(&meas_peaks, Mode::Active).as_ref(),
        );
        emit(&mut manifest, "report_measured.json".into(), r.to_json().as_bytes())?;
        Some(r)
    } else {
        None
    };

    let mut patterns = Vec::new();
    for (mode, seq) in &sequences {
        for target in &plan.pattern_targets {
            let existing = seq
                .iter()
                .find(|e| e.target == SequenceTarget::Steering(*target));
            let (config_id, config) = match existing {
                Some(e) => (e.config_id, e.configuration.clone()),
                None => (
                    0,
                    design_configuration(&setup.array, &setup.scene, &setup.model, *mode, *target, setup.rx_range)?,
                ),
            };
            let mut target_setup = setup.clone();
            target_setup.scene = setup.scene.with_rx_direction(*target, setup.rx_range)?;
            let options = ScanOptions {
                grid_spacing: plan.scan.spacing,
                extent: plan.scan.extent,
                exclude_tx_cone: plan.exclude_tx_cone,
                path: plan.pattern_path,
                noise: plan.snr_db.map_or(NoiseLevel::None, NoiseLevel::SnrAtTarget),
                seed: plan.seed,
                config_id,
                calibration_records: plan.calibration_count,
            };
            patterns.push((*mode, *target, scan_pattern(&target_setup, &config, &options)?));
        }
    }
    let campaign_max = patterns
        .iter()
        .map(|(_, _, p)| p.max_power())
        .fold(0.0, f64::max);
    if campaign_max > 0.0 {
        for (mode, target, pattern) in &patterns {
            if pattern.is_empty() {
                continue;
            }
            let name = format!(
                "pattern_{mode}_az{}_el{}.csv",
                fmt_angle(target.azimuth),
                fmt_angle(target.elevation)
            );
            let path = out_dir.join(&name);
            emit_pattern_csv(pattern, Some(campaign_max), &path)?;
            for file in [name.clone(), name.replace(".csv", ".json")] {
                let bytes = std::fs::read(out_dir.join(&file)).map_err(|e| RisError::io(out_dir.join(&file), e))?;
                manifest.outputs.push(OutputFile {
                    file,
                    bytes: bytes.len() as u64,
                    sha256: sha256_hex(&bytes),
                });
            }
        }
    }

    manifest.complete = true;
    write_manifest(&manifest)?;
    Ok(CampaignOutcome {
        manifest,
        sequences,
        simulation,
        measurement,
        patterns,
    })
}
