mod common;

use std::path::Path;
use std::process::Command;

use ris_core::beamform::{phase_profile, select_active, select_passive, PassiveStateSet};
use ris_core::campaign::{
    build_default_scenario, emit_pattern_csv, generate_sequence, read_pattern_csv, run_campaign, CampaignPlan,
    ComparisonReport, GridSpec, Manifest, ModeSelection, SequenceTarget,
};
use ris_core::channel::{ElementState, Mode};
use ris_core::geometry::Direction;
use ris_core::records::{RecordFile, RecordKind};
use ris_core::sounder::{FieldPattern, PatternPoint};
use ris_core::RisError;

fn small_plan() -> CampaignPlan {
    CampaignPlan {
        steering: GridSpec { spacing: 15.0, extent: 45.0 },
        scan: GridSpec { spacing: 7.5, extent: 45.0 },
        snr_db: Some(30.0),
        seed: 7,
        ..CampaignPlan::default()
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn two_runs_are_byte_identical() {
    let plan = small_plan();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_campaign(&plan, a.path()).unwrap();
    run_campaign(&CampaignPlan { workers: Some(1), ..plan.clone() }, b.path()).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    for want in ["manifest.json", "records_passive.bin", "records_active.bin", "report.json", "pattern_active_az15_el30.csv"] {
        assert!(names.contains(&want), "missing {want} in {names:?}");
    }
    // The worker count is part of the plan, so only the manifest may differ.
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        if na != "manifest.json" && na != "plan.json" {
            assert!(ba == bb, "{na} differs");
        }
    }
    let c = tempfile::tempdir().unwrap();
    run_campaign(&plan, c.path()).unwrap();
    assert_eq!(fa, dir_bytes(c.path()));
}

#[test]
fn manifest_counts_and_dense_ids() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_campaign(&small_plan(), dir.path()).unwrap();
    let manifest: Manifest = read_json(&dir.path().join("manifest.json"));
    assert!(manifest.complete);
    assert_eq!(manifest, outcome.manifest);
    assert_eq!(manifest.counts.len(), 2);
    for c in &manifest.counts {
        assert_eq!(c.steering, 49);
        assert_eq!(c.calibration, 10);
        assert_eq!(c.total, c.steering + c.calibration);
    }
    for (_, seq) in &outcome.sequences {
        let ids: Vec<u32> = seq.iter().map(|e| e.config_id).collect();
        assert_eq!(ids, (1..=seq.len() as u32).collect::<Vec<_>>());
    }
    for out in &manifest.outputs {
        let bytes = std::fs::read(dir.path().join(&out.file)).unwrap();
        assert_eq!(bytes.len() as u64, out.bytes);
        assert_eq!(ris_core::campaign::sha256_hex(&bytes), out.sha256, "{}", out.file);
    }
}

#[test]
fn full_grid_has_371_configurations() {
    let s = build_default_scenario();
    let plan = CampaignPlan::default();
    let seq = generate_sequence(&plan, Mode::Active, &s.array, &s.scene).unwrap();
    assert_eq!(seq.len(), 371);
    let steering = seq.iter().filter(|e| e.target != SequenceTarget::Calibration).count();
    assert_eq!(steering, 361);
    assert!(seq[..5].iter().chain(&seq[366..]).all(|e| e.target == SequenceTarget::Calibration));
}

#[test]
fn calibration_count_two_brackets_the_sequence() {
    let s = build_default_scenario();
    let plan = CampaignPlan { calibration_count: 2, ..small_plan() };
    let seq = generate_sequence(&plan, Mode::Passive, &s.array, &s.scene).unwrap();
    for e in [seq.first().unwrap(), seq.last().unwrap()] {
        assert_eq!(e.target, SequenceTarget::Calibration);
        assert!(e.configuration.is_all_off());
    }
    assert!(seq[1..seq.len() - 1].iter().all(|e| e.target != SequenceTarget::Calibration));
}

#[test]
fn steering_entries_match_direct_design() {
    let s = build_default_scenario();
    let plan = CampaignPlan { steering: GridSpec { spacing: 10.0, extent: 40.0 }, ..CampaignPlan::default() };
    let states = PassiveStateSet::from_model(&s.model).unwrap();
    for mode in [Mode::Passive, Mode::Active] {
        for e in generate_sequence(&plan, mode, &s.array, &s.scene).unwrap() {
            let SequenceTarget::Steering(d) = e.target else { continue };
            let prof = phase_profile(&s.array, &s.scene.with_rx_direction(d, 5.0).unwrap()).unwrap();
            let want = match mode {
                Mode::Passive => select_passive(&prof, &states),
                Mode::Active => select_active(&prof),
            };
            assert_eq!(e.configuration, want, "{mode} {d}");
        }
    }
}

#[test]
fn sequences_are_mode_pure() {
    let s = build_default_scenario();
    for mode in [Mode::Passive, Mode::Active] {
        for e in generate_sequence(&small_plan(), mode, &s.array, &s.scene).unwrap() {
            if e.target == SequenceTarget::Calibration {
                continue;
            }
            assert_eq!(e.configuration.mode(), mode);
            assert!(e.configuration.states().iter().all(|st| st.mode() == mode));
        }
    }
}

#[test]
fn report_gains_are_peak_differences() {
    let dir = tempfile::tempdir().unwrap();
    run_campaign(&small_plan(), dir.path()).unwrap();
    for name in ["report.json", "report_measured.json"] {
        let report: ComparisonReport = read_json(&dir.path().join(name));
        assert_eq!(report.targets.len(), 49);
        for t in &report.targets {
            let want = t.active_peak_db.unwrap() - t.passive_peak_db.unwrap();
            assert!((t.gain_db.unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
        assert_eq!(report.summary.as_ref().unwrap().count, 49);
    }
}

#[test]
fn record_files_agree_with_the_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_campaign(&small_plan(), dir.path()).unwrap();
    for (mode, seq) in &outcome.sequences {
        let file = RecordFile::read(&dir.path().join(format!("records_{mode}.bin"))).unwrap();
        assert_eq!(file.header.mode, *mode);
        assert_eq!(file.header.campaign_seed, 7);
        let ids: Vec<u32> = file.records.iter().map(|r| r.config_id).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted, "records persisted in config_id order");
        for r in &file.records {
            let e = &seq[r.config_id as usize - 1];
            match (r.kind, e.target) {
                (RecordKind::Steering, SequenceTarget::Steering(d)) => assert_eq!(r.direction, d),
                (RecordKind::Calibration, SequenceTarget::Calibration) => {}
                other => panic!("record kind mismatch {other:?}"),
            }
            assert!(r.noise_power > 0.0);
        }
    }
}

#[test]
fn empty_steering_grid_reports_only_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let plan = CampaignPlan { targets: Some(vec![]), pattern_targets: vec![], ..small_plan() };
    let outcome = run_campaign(&plan, dir.path()).unwrap();
    let report: serde_json::Value = read_json(&dir.path().join("report.json"));
    assert_eq!(report["targets"].as_array().unwrap().len(), 0);
    assert!(report["summary"].is_null());
    let ids: Vec<u64> = report["calibration_config_ids"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    assert!(outcome.measurement.unwrap().summary.is_none());
}

#[test]
fn target_list_replays_a_subset() {
    let dir = tempfile::tempdir().unwrap();
    let targets = vec![Direction::new(15.0, 30.0).unwrap(), Direction::new(-10.0, 5.0).unwrap()];
    let plan = CampaignPlan { targets: Some(targets.clone()), modes: ModeSelection::Active, ..small_plan() };
    let outcome = run_campaign(&plan, dir.path()).unwrap();
    let (_, seq) = &outcome.sequences[0];
    let got: Vec<Direction> = seq
        .iter()
        .filter_map(|e| match e.target {
            SequenceTarget::Steering(d) => Some(d),
            SequenceTarget::Calibration => None,
        })
        .collect();
    assert_eq!(got, targets);
    assert!(outcome.simulation.summary.is_none(), "no passive half to compare against");
}

#[test]
fn io_failure_leaves_an_incomplete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("records_passive.bin");
    std::fs::create_dir(&blocker).unwrap();
    match run_campaign(&small_plan(), dir.path()) {
        Err(RisError::Io { path, .. }) => assert_eq!(path, blocker),
        other => panic!("expected an I/O error, got {other:?}"),
    }
    let manifest: Manifest = read_json(&dir.path().join("manifest.json"));
    assert!(!manifest.complete);
}

fn pattern(points: Vec<(f64, f64, f64)>, spacing: f64) -> FieldPattern {
    FieldPattern {
        points: points
            .into_iter()
            .map(|(az, el, power)| PatternPoint { direction: Direction::new(az, el).unwrap(), power })
            .collect(),
        grid_spacing: spacing,
        extent: 45.0,
        excluded_radius: None,
        tx_direction: Direction::new(-25.0, 0.0).unwrap(),
    }
}

#[test]
fn pattern_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");

    emit_pattern_csv(&pattern(vec![(0.0, 0.0, 3.7e-9)], 5.0), None, &path).unwrap();
    let rows = read_pattern_csv(&path).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].1, 0.0);

    let mut rng = common::rng(4);
    let mut pts = Vec::new();
    for el in (-45..=45).step_by(5) {
        for az in (-45..=45).step_by(5) {
            pts.push((az as f64, el as f64, rand::Rng::random_range(&mut rng, 1e-12..1e-6)));
        }
    }
    let p = pattern(pts.clone(), 5.0);
    let reference = 2e-6;
    emit_pattern_csv(&p, Some(reference), &path).unwrap();
    let rows = read_pattern_csv(&path).unwrap();
    assert_eq!(rows.len(), 361);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "az_deg,el_deg,power_dB");
    for ((d, db), (az, el, pw)) in rows.iter().zip(&pts) {
        assert_eq!((d.azimuth, d.elevation), (*az, *el), "row-major order");
        assert!((db - 10.0 * (pw / reference).log10()).abs() < 1e-9);
    }
    assert!(emit_pattern_csv(&p, None, &dir.path().join("missing/p.csv")).is_err());
}

fn ris(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ris")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = out.to_str().unwrap();
    let small = ["--steering-spacing", "15", "--scan-spacing", "7.5"];

    let run = |extra: &[&str]| {
        let mut args = vec!["campaign", "-o", o];
        args.extend(small);
        args.extend(extra);
        ris(&args).status.code()
    };
    assert_eq!(run(&[]), Some(0));
    assert_eq!(run(&["--snr-db", "30"]), Some(2), "noisy run without a seed");
    assert_eq!(run(&["--snr-db", "30", "--seed", "3"]), Some(0));
    assert_eq!(run(&["--assert-gain", "40"]), Some(4));
    assert_eq!(run(&["--plan", "/nonexistent/plan.json"]), Some(3));
    assert_eq!(run(&["--steering-spacing", "-1"]), Some(2));

    let p = out.join("records_passive.bin");
    let a = out.join("records_active.bin");
    let cmp = ris(&["compare", "--passive", p.to_str().unwrap(), "--active", a.to_str().unwrap()]);
    assert_eq!(cmp.status.code(), Some(0));
    let report: ComparisonReport = serde_json::from_slice(&cmp.stdout).unwrap();
    assert_eq!(report.targets.len(), 49);
    let swapped = ris(&["compare", "--passive", a.to_str().unwrap(), "--active", p.to_str().unwrap()]);
    assert_eq!(swapped.status.code(), Some(2));

    let design = ris(&["design", "--mode", "active", "--az", "15", "--el", "30"]);
    assert_eq!(design.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&design.stdout).unwrap();
    assert_eq!(v["states"].as_str().unwrap().len(), 37);

    let csv = dir.path().join("sweep.csv");
    let sweep = ris(&["sweep", "--mode", "passive", "--az", "15", "--el", "30", "--scan-spacing", "15", "-o", csv.to_str().unwrap()]);
    assert_eq!(sweep.status.code(), Some(0));
    assert!(read_pattern_csv(&csv).unwrap().iter().any(|(_, db)| *db == 0.0));

    let bad = ris(&["sweep", "--mode", "passive", "--az", "15", "--el", "30", "--config", "AB", "-o", csv.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));

    let scenario = ris(&["scenario", "--plan"]);
    let plan = CampaignPlan::from_json(std::str::from_utf8(&scenario.stdout).unwrap()).unwrap();
    assert_eq!(plan, CampaignPlan::default());
}

#[test]
fn calibration_entries_are_all_off_in_both_modes() {
    let s = build_default_scenario();
    for mode in [Mode::Passive, Mode::Active] {
        let seq = generate_sequence(&small_plan(), mode, &s.array, &s.scene).unwrap();
        for e in seq.iter().filter(|e| e.target == SequenceTarget::Calibration) {
            assert!(e.configuration.states().iter().all(|st| *st == ElementState::ActiveOff));
        }
    }
}
