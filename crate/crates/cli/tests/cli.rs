use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const REFERENCE: &str = r#"{"gamma": 1, "chi": 2.5, "a": 1, "M": 3.141592653589793, "R0": 1,
    "force": {"kind": "hill", "L": 2, "alpha": 1}}"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cellwave"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn threshold_reports_chi_star() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), REFERENCE, &["threshold"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("out/threshold.json"));
    assert!((doc["chi_star"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn missing_gamma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"chi": 2.5, "a": 1, "M": 3.14, "R0": 1, "force": {"kind": "hill", "L": 2, "alpha": 1}}"#;
    let out = run(dir.path(), config, &["threshold"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
}

#[test]
fn decreasing_force_table_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"gamma": 1, "chi": 2.5, "a": 1, "M": 3.14, "R0": 1,
        "force": {"kind": "table", "L": 2, "rows": [[0, 0, 1, 0, 0], [1, -1, -1, 0, 0], [2, -2, -1, 0, 0]]}}"#;
    let out = run(dir.path(), config, &["bifurcate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn incompatible_pressure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), REFERENCE, &["tw", "--p1", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_wave_writes_scan() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(r#"{{"params": {REFERENCE}, "tw": {{"mode": "fixed_area"}}}}"#);
    let out = run(dir.path(), &config, &["tw", "--chi", "1.9"]);
    assert_eq!(out.status.code(), Some(1));
    let scan = fs::read_to_string(dir.path().join("out/scan.csv")).unwrap();
    assert!(scan.starts_with("V,G\n"));
    assert!(!dir.path().join("out/wave.json").exists());
}

#[test]
fn fixed_area_wave_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(r#"{{"params": {REFERENCE}, "tw": {{"mode": "fixed_area", "boundary_points": 128}}}}"#);
    let out = run(dir.path(), &config, &["tw"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let wave = read_json(&dir.path().join("out/wave.json"));
    assert_eq!(wave["diagnostics_passed"], Value::Bool(true));
    assert!(wave["V"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(dir.path().join("out/boundary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 129);
    assert!(fs::read_to_string(dir.path().join("out/shape.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn spectrum_and_bifurcation_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(r#"{{"params": {REFERENCE}, "spectrum": {{"kappa_act": 1.1}}}}"#);
    assert_eq!(run(dir.path(), &config, &["spectrum", "--modes", "1,2"]).status.code(), Some(0));
    let spec = read_json(&dir.path().join("out/spectrum.json"));
    assert_eq!(spec["modes"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("out/dispersion_m1.csv").exists());
    assert!(!dir.path().join("out/dispersion_m0.csv").exists());

    assert_eq!(run(dir.path(), &config, &["bifurcate"]).status.code(), Some(0));
    let bif = read_json(&dir.path().join("out/bifurcation.json"));
    assert_eq!(bif["classification"], "supercritical");
}

#[test]
fn sweep_records_failures() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(r#"{{"params": {REFERENCE}, "tw": {{"mode": "fixed_area"}}, "sweep": {{"chi": [1.9, 2.2]}}}}"#);
    let out = run(dir.path(), &config, &["sweep"]);
    assert_eq!(out.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("out/branch.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.9,") && !lines[1].ends_with(','));
    assert!(lines[2].starts_with("2.2,"));
}
