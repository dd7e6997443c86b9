use std::fs;
use std::path::Path;
use std::process::Command;

use ks_harness::config::parse_config;
use ks_harness::presets::preset;
use ks_harness::record::{load_record, CheckStatus, RECORD_FILE};
use ks_harness::{execute, run_scenario, ScenarioConfig};
use ks_radial::ks::Termination;
use ks_radial::profile::BlowupTrigger;

fn single(name: &str) -> ScenarioConfig {
    preset(name).unwrap().remove(0)
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != RECORD_FILE {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn elliptic_suite_passes_every_case() {
    let rec = execute(&single("elliptic-suite")).unwrap().record;
    let suite = rec.reports.delta_v_suite.as_ref().unwrap();
    assert_eq!(suite.cases.len(), 50);
    assert_eq!(suite.passed, 50);
    assert!(rec.passed(), "{:?}", rec.checks);
    let pairs: Vec<(usize, f64)> = suite.cases.iter().map(|c| (c.n, c.q)).collect();
    for want in [(2, 1.0), (2, 2.0), (3, 1.0), (3, 2.0), (3, 3.0)] {
        assert!(pairs.contains(&want), "{want:?} missing");
    }
}

#[test]
fn suite_depends_on_seed_only() {
    let mut cfg = single("elliptic-suite");
    cfg.grid.refine = 1;
    cfg.checks.delta_v_suite.as_mut().unwrap().cases = 10;
    let a = execute(&cfg).unwrap().record;
    let b = execute(&cfg).unwrap().record;
    assert_eq!(a.payload_json(), b.payload_json());
    cfg.seed += 1;
    let c = execute(&cfg).unwrap().record;
    assert_ne!(a.reports.delta_v_suite, c.reports.delta_v_suite);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = single("ks2d-supercritical");
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = run_scenario(&cfg, d1.path()).unwrap();
    let b = run_scenario(&cfg, d2.path()).unwrap();
    assert_eq!(a.payload_json(), b.payload_json());
    let (fa, fb) = (
        files_under(&d1.path().join(&cfg.name)),
        files_under(&d2.path().join(&cfg.name)),
    );
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn record_file_round_trip_is_lossless() {
    let cfg = single("ks2d-supercritical");
    let dir = tempfile::tempdir().unwrap();
    let rec = run_scenario(&cfg, dir.path()).unwrap();
    let back = load_record(&dir.path().join(&cfg.name).join(RECORD_FILE)).unwrap();
    assert_eq!(back, rec);
    for s in &rec.series {
        assert!(dir.path().join(&cfg.name).join(s).is_file(), "{s}");
    }
    // the echo alone reproduces the run
    let echoed = parse_config(&rec.config).unwrap();
    assert_eq!(echoed, cfg);
    assert_eq!(execute(&echoed).unwrap().record.payload_json(), rec.payload_json());
}

#[test]
fn subcritical_preset_reaches_t_end() {
    let rec = execute(&single("ks2d-subcritical")).unwrap().record;
    assert_eq!(rec.termination, Some(Termination::ReachedTEnd));
    assert!(rec.blowup.is_none());
    assert!(rec.passed(), "{:?}", rec.checks);
}

#[test]
fn supercritical_preset_reports_blowup() {
    let rec = execute(&single("ks2d-supercritical")).unwrap().record;
    assert_eq!(rec.termination, Some(Termination::BlowupDetected));
    let ev = rec.blowup.unwrap();
    assert_eq!(ev.trigger, BlowupTrigger::SupThreshold);
    assert!(ev.t_est > 1e-3 && ev.t_est < 1e-2, "{ev:?}");
    let exps = rec.exponents.unwrap();
    assert_eq!(exps.p0, 1.0);
    assert_eq!(exps.alpha_lower, Some(2.0));
    assert_eq!(rec.reports.profiles.len(), 2);
}

#[test]
fn dt_underflow_is_an_event_not_an_error() {
    let mut cfg = single("ks2d-supercritical");
    cfg.grid.refine = 1;
    cfg.checks.profile = None;
    cfg.checks.expect_termination = Some(Termination::DtUnderflow);
    cfg.time.policy.sup_threshold = 1e12;
    cfg.time.policy.dt_floor = 1e-7;
    let rec = execute(&cfg).unwrap().record;
    assert_eq!(rec.termination, Some(Termination::DtUnderflow));
    assert_eq!(rec.blowup.unwrap().trigger, BlowupTrigger::DtUnderflow);
    assert!(rec.passed(), "{:?}", rec.checks);
}

#[test]
fn parabolic_preset_reports_probes() {
    let rec = execute(&single("parabolic-gradient")).unwrap().record;
    let env = &rec.reports.gradient_envelope;
    assert_eq!(env.len(), 2);
    assert!(!env[0].below_threshold && env[1].below_threshold);
    let w1p = rec.checks.iter().find(|c| c.name == "w1p").unwrap();
    assert_eq!(w1p.status, CheckStatus::Pass);
}

#[test]
fn semigroup_preset_passes() {
    let rec = execute(&single("semigroup-interval")).unwrap().record;
    assert!(rec.passed(), "{:?}", rec.checks);
    assert_eq!(rec.reports.linfty.as_ref().unwrap().ratios.len(), 20);
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let mut cfg = single("z-equation-2d");
    cfg.model.tau = 0.0;
    assert!(matches!(execute(&cfg), Err(ks_harness::HarnessError::Config(_))));
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ks-harness"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let (code, stdout, _) = cli(&["verify", "z-equation", "--out", out]);
    assert_eq!(code, 0, "{stdout}");
    assert!(dir.path().join("z-equation-2d").join(RECORD_FILE).is_file());

    // the control probe falls short of the flagging factor
    let (code, stdout, _) = cli(&["verify", "parabolic-gradient", "--out", out]);
    assert_eq!(code, 1, "{stdout}");

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nkind = \"ks\"\nbogus = 1\n").unwrap();
    let (code, _, stderr) = cli(&["run", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown key `bogus`"), "{stderr}");

    let (code, _, stderr) = cli(&["verify", "nope", "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown preset"), "{stderr}");

    let good = dir.path().join("good.toml");
    fs::write(&good, preset_config("z-equation-3d")).unwrap();
    let (code, stdout, _) = cli(&[
        "run",
        good.to_str().unwrap(),
        "--out",
        out,
        "--refine",
        "1",
        "--seed",
        "9",
    ]);
    assert_eq!(code, 0, "{stdout}");
    let rec = load_record(&dir.path().join("z-equation-3d").join(RECORD_FILE)).unwrap();
    let echoed = parse_config(&rec.config).unwrap();
    assert_eq!((echoed.grid.refine, echoed.seed), (1, 9));

    let (code, stdout, _) = cli(&["report", out, "--out", out]);
    assert_eq!(code, 1, "parabolic-gradient failed above");
    assert!(stdout.contains("z-equation-2d"), "{stdout}");
    assert!(dir.path().join("report").join("checks.csv").is_file());
}

fn preset_config(name: &str) -> String {
    ks_harness::presets::preset_text(name).unwrap().to_string()
}
