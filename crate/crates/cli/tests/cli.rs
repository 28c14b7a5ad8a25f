//! End-to-end checks of the binary: subcommands, file outputs, determinism,
//! and the exit-code convention.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modcoord"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

#[test]
fn run_writes_a_csv_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let status = bin()
        .args(["run", "--scenario"])
        .arg(scenario("line2.toml"))
        .args(["--horizon", "0.5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t,Q_s1,Q_s2,c_s1"));
    assert_eq!(text.lines().count(), 502); // header + 501 records
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let status = bin()
            .args(["run", "--scenario"])
            .arg(scenario("line2.toml"))
            .args(["--horizon", "0.5", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn constants_emits_the_ledger() {
    let output = bin()
        .args(["constants", "--scenario"])
        .arg(scenario("line2.toml"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    for key in ["theta", "sigma_g", "delta_min", "delta_max", "rho_omega"] {
        assert!(text.contains(key), "ledger output missing {key}");
    }
}

#[test]
fn oracle_reports_residual_and_bounds() {
    let output = bin()
        .args(["oracle", "--scenario"])
        .arg(scenario("line2.toml"))
        .args(["--zeta", "2.4,2.6"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("residual ="));
    assert!(text.contains("bounds hold: coupling true balance true"));
}

#[test]
fn check_passes_on_a_valid_scenario() {
    let output = bin()
        .args(["check", "--scenario"])
        .arg(scenario("line2.toml"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("check monotonicity certificate: PASS"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn assumption_violation_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("line2.toml"))
        .unwrap()
        .replace("c_max = 3.0", "c_max = 9.0");
    std::fs::write(&path, text).unwrap();
    let status = bin()
        .args(["constants", "--scenario"])
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn malformed_scenario_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    let text = std::fs::read_to_string(scenario("line2.toml"))
        .unwrap()
        .replace("beta_max", "beta_maxx");
    std::fs::write(&path, text).unwrap();
    let output = bin()
        .args(["oracle", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.contains("missing field"), "stderr: {err}");
}

#[test]
fn infeasible_target_exits_with_code_two() {
    let status = bin()
        .args(["oracle", "--scenario"])
        .arg(scenario("line2.toml"))
        .args(["--zeta", "50.0,50.0"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
