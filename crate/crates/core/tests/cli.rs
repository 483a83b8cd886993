//! Exercises the `auxlayer` binary end to end: exit codes, artifact files,
//! replay verification. Uses short-horizon copies of the bundled scenarios
//! so the whole suite stays fast.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_auxlayer"))
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn short_copy(name: &str, dir: &Path, horizon: f64) -> PathBuf {
    let raw = std::fs::read_to_string(scenario_path(name)).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&raw).unwrap();
    v["sim"]["horizon"] = serde_json::json!(horizon);
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn validate_accepts_bundled_scenarios() {
    for name in ["offset_capture", "dynamic_beta1", "single_mode", "no_attack"] {
        let out = bin().arg("validate").arg(scenario_path(name)).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("scenario valid"), "{name}: {}", stdout(&out));
    }
}

#[test]
fn validate_rejects_broken_trigger_constants() {
    let dir = tempfile::tempdir().unwrap();
    let raw = std::fs::read_to_string(scenario_path("dynamic_beta1")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&raw).unwrap();
    // c2 far above lambda_min(Qz)/beta violates the decay inequalities
    v["design"]["c2"] = serde_json::json!(100.0);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();

    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(stdout(&out).contains("scenario INVALID"), "{}", stdout(&out));
}

#[test]
fn validate_rejects_disconnected_graph() {
    let dir = tempfile::tempdir().unwrap();
    let raw = std::fs::read_to_string(scenario_path("no_attack")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&raw).unwrap();
    v["graph"]["edges"] = serde_json::json!([[1, 2], [1, 3], [2, 3]]);
    let path = dir.path().join("disconnected.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();

    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_writes_artifacts_and_replay_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_copy("dynamic_beta1", dir.path(), 0.5);
    let out_dir = dir.path().join("out");

    let out = bin().arg("run").arg(&scenario).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["trajectory.csv", "events.csv", "summary.json", "resolved_config.json"] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["mode"], "dynamic");
    assert!(summary["aborted"].is_null());

    let replay =
        bin().arg("replay").arg(&scenario).arg("--dir").arg(&out_dir).output().unwrap();
    assert!(replay.status.success(), "{}", stdout(&replay));
    assert!(
        stdout(&replay).contains("trajectory: match, events: match, summary: match"),
        "{}",
        stdout(&replay)
    );
}

#[test]
fn replay_detects_tampered_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_copy("no_attack", dir.path(), 0.5);
    let out_dir = dir.path().join("out");
    let out = bin().arg("run").arg(&scenario).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success());

    let events = out_dir.join("events.csv");
    let mut text = std::fs::read_to_string(&events).unwrap();
    text.push_str("9.9,physical,0.1,0.0,0.0\n");
    std::fs::write(&events, text).unwrap();

    let replay =
        bin().arg("replay").arg(&scenario).arg("--dir").arg(&out_dir).output().unwrap();
    assert!(!replay.status.success());
    assert!(stdout(&replay).contains("MISMATCH"), "{}", stdout(&replay));
}

#[test]
fn sweep_cli_overrides_betas() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_copy("beta_sweep", dir.path(), 0.5);
    let out_dir = dir.path().join("sweep");

    let out = bin()
        .arg("sweep")
        .arg(&scenario)
        .arg("--betas")
        .arg("0,1")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("sweep.json")).unwrap())
            .unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["beta"], 0.0);
    assert_eq!(rows[1]["beta"], 1.0);
}

#[test]
fn design_report_exposes_certified_constants() {
    let out = bin()
        .arg("design-report")
        .arg(scenario_path("dynamic_beta1"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let lam = report["lambda_min_qx"].as_f64().unwrap();
    assert!((lam - 0.30900).abs() < 1e-4, "lambda_min_qx = {lam}");
    assert!(report["coupling_residual"].as_f64().unwrap() <= 1e-10);
    assert!(report["d_residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(report["n_agents"], 5);
}

#[test]
fn missing_file_fails_cleanly() {
    let out = bin().arg("run").arg("/nonexistent/scenario.json").output().unwrap();
    assert!(!out.status.success());
}
