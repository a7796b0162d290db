use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ris_core::campaign::{
    build_default_scenario, compare_record_files, design_configuration, emit_pattern_csv, run_campaign,
    CampaignPlan, ComparisonReport, ModeSelection,
};
use ris_core::channel::{power_to_db, received_power, Mode, RisConfiguration};
use ris_core::document::SceneDocument;
use ris_core::geometry::Direction;
use ris_core::records::RecordFile;
use ris_core::sounder::{scan_pattern, CirWindow, NoiseLevel, PatternPath, ScanOptions};
use ris_core::RisError;

const EXIT_INVALID: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_GAIN: u8 = 4;

#[derive(Parser)]
#[command(name = "ris", version, about = "Active/passive RIS campaign simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default scene document, or the default plan with --plan.
    Scenario {
        #[arg(long)]
        plan: bool,
    },
    /// Design one configuration for one target.
    Design {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        #[arg(long, allow_negative_numbers = true)]
        az: f64,
        #[arg(long, allow_negative_numbers = true)]
        el: f64,
    },
    /// Scan the field pattern of one configuration and write it as CSV.
    Sweep {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        /// Design target; RX reference for SNR.
        #[arg(long, allow_negative_numbers = true)]
        az: f64,
        #[arg(long, allow_negative_numbers = true)]
        el: f64,
        /// Explicit states (A/B or 1/0 per element) instead of designing one.
        #[arg(long)]
        config: Option<String>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run a full campaign into a directory.
    Campaign {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        gate: GainGate,
    },
    /// Build a comparison report from a passive and an active record file.
    Compare {
        #[arg(long)]
        passive: PathBuf,
        #[arg(long)]
        active: PathBuf,
        /// CIR window as `n1:n2`.
        #[arg(long, value_parser = parse_window)]
        window: Option<CirWindow>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        gate: GainGate,
    },
}

#[derive(Args)]
struct PlanArgs {
    /// JSON plan file; flags override its fields.
    #[arg(long = "plan")]
    plan_file: Option<PathBuf>,
    /// Scene document overriding array, pose and TX placement for design/sweep.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tx_az: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tx_el: Option<f64>,
    #[arg(long)]
    steering_spacing: Option<f64>,
    #[arg(long)]
    steering_extent: Option<f64>,
    #[arg(long)]
    scan_spacing: Option<f64>,
    #[arg(long)]
    scan_extent: Option<f64>,
    #[arg(long)]
    calibration_count: Option<usize>,
    #[arg(long, value_parser = parse_modes)]
    modes: Option<ModeSelection>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    repetitions: Option<u32>,
    #[arg(long, value_enum)]
    pattern_path: Option<PathArg>,
    /// Skip the sounder chain and record files.
    #[arg(long)]
    no_sounder: bool,
}

#[derive(Args)]
struct GainGate {
    /// Exit with status 4 when the gain statistic falls below this many dB.
    #[arg(long, allow_negative_numbers = true)]
    assert_gain: Option<f64>,
    #[arg(long, value_enum, default_value_t = GainStatistic::Min)]
    gain_statistic: GainStatistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum GainStatistic {
    Min,
    Mean,
    Median,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Narrowband,
    Wideband,
    Sounder,
}

impl From<PathArg> for PatternPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Narrowband => PatternPath::Narrowband,
            PathArg::Wideband => PatternPath::Wideband,
            PathArg::Sounder => PatternPath::Sounder,
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: RisError| e.to_string())
}

fn parse_modes(s: &str) -> Result<ModeSelection, String> {
    s.parse().map_err(|e: RisError| e.to_string())
}

fn parse_window(s: &str) -> Result<CirWindow, String> {
    let (a, b) = s.split_once(':').ok_or("expected n1:n2")?;
    Ok(CirWindow {
        n1: a.parse().map_err(|_| "bad n1")?,
        n2: b.parse().map_err(|_| "bad n2")?,
    })
}

enum Failure {
    Error(RisError),
    Gain(String),
}

impl From<RisError> for Failure {
    fn from(e: RisError) -> Self {
        Failure::Error(e)
    }
}

impl PlanArgs {
    fn resolve(&self) -> Result<CampaignPlan, RisError> {
        let (mut plan, plan_seeded) = match &self.plan_file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| RisError::Io {
                    path: p.clone(),
                    source: e,
                })?;
                let raw: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| RisError::InvalidParameter(format!("{}: {e}", p.display())))?;
                (CampaignPlan::from_json(&text)?, raw.get("seed").is_some())
            }
            None => (CampaignPlan::default(), false),
        };
        if let Some(s) = self.seed {
            plan.seed = s;
        }
        if self.snr_db.is_some() {
            plan.snr_db = self.snr_db;
        }
        if let Some(v) = self.tx_az {
            plan.tx_direction.azimuth = v;
        }
        if let Some(v) = self.tx_el {
            plan.tx_direction.elevation = v;
        }
        if let Some(v) = self.steering_spacing {
            plan.steering.spacing = v;
        }
        if let Some(v) = self.steering_extent {
            plan.steering.extent = v;
        }
        if let Some(v) = self.scan_spacing {
            plan.scan.spacing = v;
        }
        if let Some(v) = self.scan_extent {
            plan.scan.extent = v;
        }
        if let Some(v) = self.calibration_count {
            plan.calibration_count = v;
        }
        if let Some(v) = self.modes {
            plan.modes = v;
        }
        if self.workers.is_some() {
            plan.workers = self.workers;
        }
        if let Some(v) = self.repetitions {
            plan.repetitions_per_point = v;
        }
        if let Some(v) = self.pattern_path {
            plan.pattern_path = v.into();
        }
        if self.no_sounder {
            plan.sounder = false;
        }
        let noisy = plan.snr_db.is_some_and(|s| s.is_finite());
        if noisy && self.seed.is_none() && !plan_seeded {
            return Err(RisError::InvalidParameter(
                "--seed is required when an SNR is set".into(),
            ));
        }
        plan.validate()?;
        Ok(plan)
    }

    fn setup(&self, plan: &CampaignPlan) -> Result<ris_core::sounder::ScanSetup, RisError> {
        let mut setup = plan.scan_setup()?;
        if let Some(p) = &self.scene {
            let doc = SceneDocument::load(p)?;
            setup.array = doc.array;
            setup.scene = doc.scene;
            setup.model = doc.reflection_model;
            setup.budget = doc.link_budget;
        }
        Ok(setup)
    }
}

fn check_gain(report: &ComparisonReport, gate: &GainGate) -> Result<(), Failure> {
    let Some(threshold) = gate.assert_gain else {
        return Ok(());
    };
    let Some(summary) = &report.summary else {
        return Err(Failure::Gain("no gain values to check".into()));
    };
    let (name, value) = match gate.gain_statistic {
        GainStatistic::Min => ("minimum", summary.min_db),
        GainStatistic::Mean => ("mean", summary.mean_db),
        GainStatistic::Median => ("median", summary.median_db),
    };
    if value < threshold {
        return Err(Failure::Gain(format!(
            "{name} gain {value:.3} dB is below {threshold} dB"
        )));
    }
    Ok(())
}

fn write_json(path: &Path, text: &str) -> Result<(), RisError> {
    std::fs::write(path, text).map_err(|e| RisError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Scenario { plan } => {
            if plan {
                println!("{}", CampaignPlan::default().to_json());
            } else {
                let s = build_default_scenario();
                println!("{}", SceneDocument::new(s.array, s.scene, s.model, s.budget).to_json());
            }
        }
        Command::Design { plan, mode, az, el } => {
            let resolved = plan.resolve()?;
            let setup = plan.setup(&resolved)?;
            let target = Direction::new(az, el)?;
            let config =
                design_configuration(&setup.array, &setup.scene, &setup.model, mode, target, setup.rx_range)?;
            let scene = setup.scene.with_rx_direction(target, setup.rx_range)?;
            let p = received_power(&setup.array, &scene, &config, &setup.model, &setup.budget)?;
            let out = json!({
                "mode": mode,
                "target": target,
                "states": config.to_compact(),
                "received_power_w": p,
                "received_power_db": power_to_db(p),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
        }
        Command::Sweep {
            plan,
            mode,
            az,
            el,
            config,
            out,
        } => {
            let resolved = plan.resolve()?;
            let mut setup = plan.setup(&resolved)?;
            let target = Direction::new(az, el)?;
            let config = match config {
                Some(c) => {
                    let c = RisConfiguration::from_compact(&c)?;
                    if c.len() != setup.array.len() {
                        return Err(RisError::InvalidParameter(format!(
                            "configuration has {} states, array has {} elements",
                            c.len(),
                            setup.array.len()
                        ))
                        .into());
                    }
                    c
                }
                None => design_configuration(&setup.array, &setup.scene, &setup.model, mode, target, setup.rx_range)?,
            };
            setup.scene = setup.scene.with_rx_direction(target, setup.rx_range)?;
            let options = ScanOptions {
                grid_spacing: resolved.scan.spacing,
                extent: resolved.scan.extent,
                exclude_tx_cone: resolved.exclude_tx_cone,
                path: resolved.pattern_path,
                noise: resolved.snr_db.map_or(NoiseLevel::None, NoiseLevel::SnrAtTarget),
                seed: resolved.seed,
                config_id: 0,
                calibration_records: resolved.calibration_count,
            };
            let pattern = scan_pattern(&setup, &config, &options)?;
            emit_pattern_csv(&pattern, None, &out)?;
            if let Some(best) = pattern.argmax() {
                eprintln!(
                    "{} points, peak {:.3} dB at {}",
                    pattern.len(),
                    power_to_db(best.power),
                    best.direction
                );
            }
        }
        Command::Campaign { plan, out, gate } => {
            let resolved = plan.resolve()?;
            let outcome = run_campaign(&resolved, &out)?;
            let report = outcome.measurement.as_ref().unwrap_or(&outcome.simulation);
            if let Some(s) = &outcome.simulation.summary {
                eprintln!(
                    "simulation: {} targets, gain min {:.3} / mean {:.3} / median {:.3} dB",
                    s.count, s.min_db, s.mean_db, s.median_db
                );
            }
            if let Some(s) = outcome.measurement.as_ref().and_then(|m| m.summary.as_ref()) {
                eprintln!(
                    "measurement: {} targets, gain min {:.3} / mean {:.3} / median {:.3} dB",
                    s.count, s.min_db, s.mean_db, s.median_db
                );
            }
            check_gain(report, &gate)?;
        }
        Command::Compare {
            passive,
            active,
            window,
            out,
            gate,
        } => {
            let p = RecordFile::read(&passive)?;
            let a = RecordFile::read(&active)?;
            let report = compare_record_files(&p, &a, window)?;
            match out {
                Some(path) => write_json(&path, &report.to_json())?,
                None => println!("{}", report.to_json()),
            }
            check_gain(&report, &gate)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Gain(msg)) => {
            eprintln!("gain check failed: {msg}");
            ExitCode::from(EXIT_GAIN)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                RisError::Io { .. } => ExitCode::from(EXIT_IO),
                _ => ExitCode::from(EXIT_INVALID),
            }
        }
    }
}
