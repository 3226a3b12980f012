use std::path::Path;
use std::process::{Command, Output};

use longmem_core::harness::ExperimentConfig;

fn longmem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longmem")).args(args).output().unwrap()
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::preset("smoke").unwrap();
    cfg.n_list = vec![32, 64];
    cfg.sampler.iterations = 300;
    cfg.sampler.burn_in = 100;
    cfg.out = dir.join("unused");
    let path = dir.join("tiny.conf");
    std::fs::write(&path, cfg.to_config_string()).unwrap();
    path
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(longmem(&["experiment", "--bogus"]).status.code(), Some(1));
    assert_eq!(longmem(&[]).status.code(), Some(1));
    assert_eq!(longmem(&["experiment", "--preset", "nonexistent"]).status.code(), Some(1));
    assert_eq!(longmem(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "kind = consistency\nno_such_key = 3\n").unwrap();
    let out = longmem(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn validate_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = longmem(&["validate", "--seed", "3", "--cases", "20", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("properties.json")).unwrap()).unwrap();
    assert_eq!(json["cases"], 20);
}

#[test]
fn experiment_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = longmem(&["experiment", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["kind"], "consistency");
        reports.push(std::fs::read(out_dir.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}

#[test]
fn simulate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out = dir.path().join("run");
    let (config, out) = (config.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(longmem(&["simulate", "--config", config, "--out", out]).status.code(), Some(0));
    let series = dir.path().join("run/series_0.csv");
    assert!(series.exists());
    let fit = longmem(&["fit", "--config", config, "--out", out, "--series", series.to_str().unwrap()]);
    assert_eq!(fit.status.code(), Some(0), "{}", String::from_utf8_lossy(&fit.stderr));
    assert!(dir.path().join("run/samples_0.csv").exists());
    assert!(dir.path().join("run/samples_1.csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/fit.json")).unwrap()).unwrap();
    assert_eq!(json["fits"].as_array().unwrap().len(), 2);
}
