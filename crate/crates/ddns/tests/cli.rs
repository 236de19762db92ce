use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const PROJECT: &str = r#"{
  "seed": 5,
  "training": {"forest": {"n_trees": 8}, "folds": 3},
  "sweep": {"seeds_per_point": 2},
  "synth": [
    {"id": "s0", "n_samples": 300, "mno": "A"},
    {"id": "s1", "n_samples": 300, "mno": "A", "scenario": "highway", "trajectory": {"kind": "loop", "radius_m": 300}}
  ]
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddns"))
        .current_dir(dir)
        .args(["--config", "project.json"])
        .args(args)
        .output()
        .expect("spawn ddns")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = run(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

fn project(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("project.json"), config).unwrap();
    dir
}

fn trained() -> TempDir {
    let dir = project(PROJECT);
    ok(dir.path(), &["synth"]);
    ok(dir.path(), &["train"]);
    dir
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = project(r#"{"seed": 1, "sweeep": {}}"#);
    let err = fails(dir.path(), &["synth"], 2);
    assert!(err.starts_with("error[config]"), "{err}");
    assert!(err.contains("sweeep"), "{err}");
}

#[test]
fn bad_cli_value_is_a_config_error() {
    let dir = project(PROJECT);
    let err = fails(dir.path(), &["replay", "--scheme", "XCAT"], 2);
    assert!(err.contains("XCAT"), "{err}");
}

#[test]
fn non_monotone_trace_reports_the_line() {
    let dir = project(PROJECT);
    ok(dir.path(), &["synth"]);
    let path = dir.path().join("traces/s0.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(4, 5);
    std::fs::write(&path, lines.join("\n")).unwrap();
    let err = fails(dir.path(), &["ingest"], 3);
    assert!(err.starts_with("error[data]"), "{err}");
    assert!(err.contains("line 6"), "{err}");
}

#[test]
fn replay_without_model_is_a_model_error() {
    let dir = project(PROJECT);
    ok(dir.path(), &["synth"]);
    let err = fails(dir.path(), &["replay"], 4);
    assert!(err.starts_with("error[model]"), "{err}");
}

#[test]
fn predictive_scheme_needs_a_map() {
    let dir = trained();
    let err = fails(dir.path(), &["replay", "--scheme", "pCAT"], 4);
    assert!(err.contains("map"), "{err}");
    ok(dir.path(), &["map"]);
    ok(dir.path(), &["replay", "--scheme", "pCAT"]);
}

#[test]
fn empty_selection_is_a_data_error() {
    let dir = trained();
    let err = fails(dir.path(), &["--mno", "C", "replay"], 3);
    assert!(err.contains("C"), "{err}");
}

#[test]
fn sweep_emits_one_row_per_scheme_and_point() {
    let dir = trained();
    ok(dir.path(), &["map"]);
    ok(dir.path(), &["sweep", "--scheme", "periodic,CAT,pCAT,ML-pCAT", "--phi-max", "10,20,30"]);
    let points = std::fs::read_to_string(dir.path().join("out/sweep-A-uplink.csv")).unwrap();
    assert_eq!(points.lines().count(), 1 + 12, "{points}");
    let runs = std::fs::read_to_string(dir.path().join("out/sweep_runs-A-uplink.csv")).unwrap();
    // 4 schemes x 3 values x 2 traces x 2 seeds
    assert_eq!(runs.lines().count(), 1 + 48);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/sweep_summary-A-uplink.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 12);
}

#[test]
fn validate_self_comparison_and_missing_scheme() {
    let dir = project(PROJECT);
    let rates = "scheme,rate_mbits\nCAT,1.5\nCAT,3.0\nCAT,7.25\nML-CAT,2.0\nML-CAT,4.0\n";
    std::fs::write(dir.path().join("real.csv"), rates).unwrap();
    ok(dir.path(), &["validate", "real.csv", "real.csv"]);
    let table = std::fs::read_to_string(dir.path().join("out/validation.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4, "{table}");
    for row in &rows[1..] {
        let sim: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((sim - 1.0).abs() < 1e-12, "{row}");
    }
    std::fs::write(dir.path().join("sim.csv"), "scheme,rate_mbits\nCAT,1.0\nCAT,2.0\n").unwrap();
    let err = fails(dir.path(), &["validate", "real.csv", "sim.csv"], 3);
    assert!(err.contains("ML-CAT"), "{err}");
}

#[test]
fn matrix_needs_two_partitions() {
    let dir = trained();
    let err = fails(dir.path(), &["matrix", "--by", "mno"], 3);
    assert!(err.starts_with("error[data]"), "{err}");
    ok(dir.path(), &["matrix", "--by", "scenario", "--folds", "2"]);
    let m = std::fs::read_to_string(dir.path().join("out/matrix-scenario-A-uplink.csv")).unwrap();
    assert_eq!(m.lines().count(), 3, "{m}");
}
