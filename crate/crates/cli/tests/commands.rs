use std::path::Path;
use std::process::{Command, Output};

use backreact_cli::config::{parse_keys, ConfigError};
use backreact_cli::run::{BOX_HEADER, RING_HEADER};
use backreact_cli::verify::{run_check, References, CHECK_COUNT};
use backreact_cli::{sweep, Axis, CheckStatus, Level, RunError, Status, VerifyContext};

fn backreact(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backreact")).args(args).current_dir(dir).output().unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn run_emits_headers_and_sidecars() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("ring.toml"), "model = \"ring\"\n").unwrap();
    std::fs::write(tmp.path().join("box.toml"), "model = \"box\"\n").unwrap();
    let out = backreact(&["run", "ring.toml", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(first_line(&tmp.path().join("o/ring.csv")), RING_HEADER);
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("o/ring.json")).unwrap()).unwrap();
    assert_eq!(side["halt"]["reason"], "critical_length");
    assert!(side["invariants"]["energy_drift"].as_f64().unwrap() < 1e-8);
    assert_eq!(side["version"], env!("CARGO_PKG_VERSION"));

    let out = backreact(&["run", "box.toml", "--out", "o", "--quiet"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    for i in 0..2 {
        assert_eq!(first_line(&tmp.path().join(format!("o/box_{i}.csv"))), BOX_HEADER);
        let side: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join(format!("o/box_{i}.json"))).unwrap()).unwrap();
        assert_eq!(side["invariants"]["speed_non_increasing"], true);
        assert_eq!(side["initial"][1], [-0.5, 0.5][i]);
    }
}

#[test]
fn csv_rows_round_trip_and_use_lf() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("c.toml"),
        "model = \"ring\"\nt_end = 0.2\nsolver.dt = 0.01\noutput.dir = \".\"\n",
    )
    .unwrap();
    assert_eq!(backreact(&["run", "c.toml"], tmp.path()).status.code(), Some(0));
    let bytes = std::fs::read(tmp.path().join("ring.csv")).unwrap();
    assert!(!bytes.contains(&b'\r'));
    let text = String::from_utf8(bytes).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    assert!((rows[20][0] - 0.2).abs() < 1e-12);
    assert_eq!(rows[0][1], 1.0);
}

#[test]
fn tol_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "model = \"ring\"\nt_end = 0.2\n").unwrap();
    assert_eq!(backreact(&["run", "c.toml", "--tol", "1e-6", "--quiet"], tmp.path()).status.code(), Some(0));
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("out/ring.json")).unwrap()).unwrap();
    let echoed = backreact_cli::parse_config(side["config"].as_str().unwrap()).unwrap();
    assert_eq!(echoed.tol, 1e-6);
    assert_eq!(backreact(&["run", "c.toml", "--tol", "1"], tmp.path()).status.code(), Some(1));
}

#[test]
fn ring_sweep_over_initial_velocity() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("model = \"ring\"\noutput.dir = {:?}\n", tmp.path().to_str().unwrap());
    let outcome = sweep(&parse_keys(&text).unwrap(), &"ic.V0=-0.3,0,0.3".parse().unwrap()).unwrap();
    assert_eq!(outcome.points.len(), 3);
    assert_eq!(outcome.status(), Status::Truncated);
    for (i, p) in outcome.points.iter().enumerate() {
        let runs = &p.result.as_ref().unwrap().runs;
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].0.v0, [-0.3, 0.0, 0.3][i]);
        assert!(runs[0].1.csv.exists());
    }
    let summary = std::fs::read_to_string(&outcome.summary).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().skip(1).all(|l| l.contains("critical_length")));
}

#[test]
fn box_sweep_flags_lenz_law_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("model = \"box\"\noutput.dir = {:?}\n", tmp.path().to_str().unwrap());
    let outcome = sweep(&parse_keys(&text).unwrap(), &"box.t0=0.5,1,2".parse().unwrap()).unwrap();
    assert_eq!(outcome.status(), Status::Clean);
    let summary = std::fs::read_to_string(&outcome.summary).unwrap();
    let header: Vec<&str> = summary.lines().next().unwrap().split(',').collect();
    let lenz = header.iter().position(|h| *h == "lenz").unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for p in &outcome.points {
        for (sim, _) in &p.result.as_ref().unwrap().runs {
            // independent re-evaluation of the monotonicity check
            let grows = sim
                .record
                .samples
                .windows(2)
                .any(|w| w[1].state.velocity.abs() > w[0].state.velocity.abs() + 1e-9);
            assert_eq!(sim.invariants.lenz(), Some(!grows));
        }
    }
    assert!(rows.iter().all(|r| r[lenz] == "true"));
}

#[test]
fn failed_sweep_point_does_not_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("model = \"ring\"\nt_end = 0.3\noutput.dir = {:?}\n", tmp.path().to_str().unwrap());
    let outcome = sweep(&parse_keys(&text).unwrap(), &"ring.M=1,-2,3".parse().unwrap()).unwrap();
    assert!(matches!(outcome.points[1].result, Err(RunError::Config(ConfigError::OutOfRange { .. }))));
    assert!(outcome.points[0].result.is_ok() && outcome.points[2].result.is_ok());
    assert_eq!(outcome.status(), Status::Error);
    let summary = std::fs::read_to_string(&outcome.summary).unwrap();
    assert!(summary.lines().nth(2).unwrap().contains("error"));
}

#[test]
fn empty_axis_is_missing_required() {
    assert!(matches!("ic.V0=".parse::<Axis>(), Err(ConfigError::MissingRequired(_))));
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "model = \"ring\"\n").unwrap();
    let out = backreact(&["sweep", "c.toml", "--axis", "ic.V0="], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing required"));
}

#[test]
fn workers_env_var_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "model = \"ring\"\nt_end = 0.1\n").unwrap();
    let run = |w: &str| {
        Command::new(env!("CARGO_BIN_EXE_backreact"))
            .args(["sweep", "c.toml", "--axis", "ic.V0=0,0.1", "--quiet"])
            .env("DCE_WORKERS", w)
            .current_dir(tmp.path())
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run("1"), Some(0));
    assert_eq!(run("zero"), Some(1));
}

#[test]
fn verify_report_lists_every_check_once() {
    let tmp = tempfile::tempdir().unwrap();
    let out = backreact(&["verify", "--out", "v", "--quiet"], tmp.path());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("v/verify_report.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), CHECK_COUNT as usize);
    let ids: Vec<u64> = checks.iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, (1..=CHECK_COUNT as u64).collect::<Vec<_>>());
    assert_eq!(checks[8]["status"], "skipped");
    let any_fail = checks.iter().any(|c| c["status"] == "fail");
    assert_eq!(out.status.code(), Some(if any_fail { 1 } else { 0 }));
    assert!(std::fs::read_to_string(tmp.path().join("v/verify_report.txt")).unwrap().lines().count() > CHECK_COUNT as usize);
}

#[test]
fn tampered_casimir_constant_fails_the_casimir_check() {
    let refs = References {
        casimir: |kin, l| -std::f64::consts::PI / (5.0 * kin.a * kin.a * l * l),
        ..References::default()
    };
    let ctx = VerifyContext::with_references(Level::Fast, refs);
    assert_eq!(run_check(&ctx, 2).status, CheckStatus::Fail);
}

#[test]
fn tampered_factor_model_fails_the_oracle_grid() {
    let refs = References {
        published_isotropic_factor: 0.5,
        ..References::default()
    };
    let r = run_check(&VerifyContext::with_references(Level::Full, refs), 9);
    assert_eq!(r.status, CheckStatus::Fail);
    assert_eq!(run_check(&VerifyContext::new(Level::Full), 9).status, CheckStatus::DocumentedOpen);
}
