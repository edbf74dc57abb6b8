mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMOKE: &str = r#"
[[cell]]
example = "one"
T = 60
N = 8
dependence = "0"
innovation = "gaussian"
replications = 2
bootstrap_reps = 19
"#;

fn tvalpha(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvalpha"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn test_report(files: &common::ToyFiles, extra: &[&str]) -> Value {
    let mut args = vec!["test", "--returns", s(&files.returns), "--factors", s(&files.factors)];
    args.extend_from_slice(extra);
    let out = tvalpha(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn simulate_without_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tvalpha(&["simulate", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(tvalpha(&["blocklen", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    fs::write(&cfg, "[[cell]]\nexample = \"one\"\nT = 0\nN = 5\ndependence = \"0\"\ninnovation = \"gaussian\"\n").unwrap();
    let out = tvalpha(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_data_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = tvalpha(&["test", "--returns", s(&missing), "--factors", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn smoke_grid_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    fs::write(&cfg, SMOKE).unwrap();
    let out_dir = dir.path().join("out");
    let out = tvalpha(&["simulate", "--config", s(&cfg), "--out", s(&out_dir), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    let table = fs::read_to_string(out_dir.join("size_power.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    fs::write(&cfg, SMOKE).unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = tvalpha(&["simulate", "--config", s(&cfg), "--out", s(&out_dir), "--seed", "9"]);
        assert_eq!(out.status.code(), Some(0));
        (
            out.stdout,
            fs::read(out_dir.join("size_power.csv")).unwrap(),
            fs::read(out_dir.join("manifest.json")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn test_reports_six_p_values() {
    let dir = tempfile::tempdir().unwrap();
    let files = common::write_toy(dir.path(), 150, 10, 4, &[]);
    let report = test_report(&files, &["--bootstrap-reps", "49"]);
    let outcomes = report["outcomes"].as_array().unwrap();
    assert_eq!(outcomes.len(), 6);
    for o in outcomes {
        let p = o["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    assert_eq!(report["format_version"], 1);
}

#[test]
fn test_subset_and_block_override() {
    let dir = tempfile::tempdir().unwrap();
    let files = common::write_toy(dir.path(), 150, 10, 5, &[]);
    let report = test_report(&files, &["--tests", "DSUM", "--block-length", "18", "--bootstrap-reps", "49"]);
    let outcomes = report["outcomes"].as_array().unwrap();
    assert_eq!(outcomes.len(), 1);
    assert_eq!(outcomes[0]["name"], "DSUM");
    assert_eq!(outcomes[0]["diagnostics"]["block_length"], 18.0);
    assert_eq!(report["block"]["block_length"], 18);
}

#[test]
fn blocklen_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let files = common::write_toy(dir.path(), 200, 6, 6, &[]);
    let out = tvalpha(&["blocklen", "--returns", s(&files.returns), "--factors", s(&files.factors)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let l = v["selected"].as_u64().unwrap();
    assert!((2..=14).contains(&l));
    assert_eq!(v["per_series"].as_array().unwrap().len(), 6);
}

#[test]
fn empirical_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let files = common::write_toy(dir.path(), 150, 5, 7, &[(2, 10)]);
    let out_dir = dir.path().join("emp");
    let out = tvalpha(&[
        "empirical",
        "--returns",
        s(&files.returns),
        "--factors",
        s(&files.factors),
        "--bootstrap-reps",
        "19",
        "--out",
        s(&out_dir),
        "--format",
        "table",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("dropped assets: S002"));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["dropped_assets"][0], "S002");
    let csv = fs::read_to_string(out_dir.join("box_pierce.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}
