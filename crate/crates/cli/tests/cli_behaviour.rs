use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gdalab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdalab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr_record(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "one error line, got {text:?}");
    serde_json::from_str(lines[0]).unwrap()
}

fn csv_column(path: &Path, prefix: &str) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|c| c.starts_with(&format!("{prefix}["))).unwrap();
    lines.map(|l| l.split(',').nth(j).unwrap().to_string()).collect()
}

#[test]
fn empty_config_exits_2_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.json", "");
    let out = gdalab(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let rec = stderr_record(&out);
    assert_eq!(rec["status"], "error");
    assert_eq!(rec["class"], "config");
    assert!(out.stdout.is_empty());
}

#[test]
fn negative_eta_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "neg.json",
        r#"{ "kind": "spectrum-sweep", "game": { "q": [[1]], "r": [[1]], "p": [[0]] }, "eta": -1 }"#,
    );
    let out = gdalab(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let rec = stderr_record(&out);
    assert!(rec["message"].as_str().unwrap().contains("η > 0"), "{rec}");
    assert!(rec["path"].as_str().unwrap().starts_with("eta"), "{rec}");
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"kind\": \"spectrum-sweep\",\n  \"eta\": [1,\n}");
    let out = gdalab(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let rec = stderr_record(&out);
    assert_eq!(rec["line"], 4);
}

#[test]
fn non_symmetric_block_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "asym.json",
        r#"{ "kind": "spectrum-sweep", "game": { "q": [[1, 0.5], [0, 1]], "r": [[1]], "p": [[0], [0]] }, "eta": 1 }"#,
    );
    let out = gdalab(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_record(&out)["class"], "numeric");
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let out = gdalab(&["rates", "--config", configs().join("spectrum_minimal.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_record(&out)["path"], "kind");
}

#[test]
fn scalar_spectrum_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = gdalab(&[
        "spectrum",
        "--config",
        configs().join("spectrum_minimal.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1], "1e0,1e0,1e0");
    let ok: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ok["status"], "ok");
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn identical_coupling_legs_stay_together() {
    let dir = tempfile::tempdir().unwrap();
    let out = gdalab(&[
        "coupling",
        "--config",
        configs().join("coupling_identical.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rho = csv_column(&dir.path().join("coupling.csv"), "rho");
    assert!(!rho.is_empty());
    for v in rho {
        assert_eq!(v.parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn manifest_replays_to_identical_output() {
    let first = tempfile::tempdir().unwrap();
    let out = gdalab(&[
        "rates",
        "--config",
        configs().join("rates.json").to_str().unwrap(),
        "--out",
        first.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(first.path().join("manifest.json")).unwrap()).unwrap();

    let second = tempfile::tempdir().unwrap();
    let echoed = write(second.path(), "echo.json", &manifest["config"].to_string());
    let replay = second.path().join("out");
    let out = gdalab(&["rates", "--config", echoed.to_str().unwrap(), "--out", replay.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for file in manifest["files"].as_array().unwrap() {
        let name = file.as_str().unwrap();
        assert_eq!(
            std::fs::read(first.path().join(name)).unwrap(),
            std::fs::read(replay.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = gdalab(&[
        "coupling",
        "--config",
        configs().join("coupling_identical.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--seed",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([40]));
}

#[test]
fn zero_threads_rejected() {
    let out = gdalab(&[
        "spectrum",
        "--config",
        configs().join("spectrum_minimal.json").to_str().unwrap(),
        "--threads",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let out = gdalab(&["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}
