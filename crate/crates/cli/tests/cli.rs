use std::fs;
use std::process::{Command, Output};

fn xlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xlab")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn list_shows_catalog() {
    let out = xlab(&["list"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["reverse-bias-scaling", "triple-point-bound", "flux-phase-sweep", "four-process"] {
        assert!(text.contains(name), "{name} missing");
    }
    assert_eq!(text.lines().count(), 14);
}

#[test]
fn run_writes_summary_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = xlab(&["run", "--preset", "product-measure", "--out", dir.path().to_str().unwrap(), "--sizes", "2,3,4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("PASS"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["preset"], "product-measure");
    assert_eq!(summary["inputs"]["sizes"], serde_json::json!([2, 3, 4]));
    assert!(summary["metrics"].as_array().unwrap().iter().all(|m| m["criterion"] == 1));
    assert!(fs::read_dir(dir.path()).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "csv")));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    fs::write(&cfg, r#"{ "seed": 5, "replicas": 40, "horizon": 50.0 }"#).unwrap();
    let out = xlab(&["run", "--preset", "monotone-coupling", "--config", cfg.to_str().unwrap(), "--replicas", "7", "--dry-run"]);
    assert!(out.status.success());
    let spec: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(spec["seed"], 5);
    assert_eq!(spec["replicas"], 7);
    assert_eq!(spec["horizon"], 50.0);
}

#[test]
fn zero_replicas_is_an_error() {
    let out = xlab(&["run", "--preset", "monotone-coupling", "--replicas", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn unknown_preset_and_unknown_config_key_fail() {
    assert_eq!(xlab(&["run", "--preset", "no-such-preset"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{ "replica": 3 }"#).unwrap();
    assert_eq!(xlab(&["run", "--preset", "kac-return", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn exact_stationary_is_a_distribution() {
    let out = xlab(&["exact", "--n", "3", "--params", "p=0.75,alpha=0.5,beta=0.4,gamma=0.1,delta=0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("configuration,weight"));
    let weights: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(weights.len(), 8);
    assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn exact_scalar_quantities() {
    let gap = xlab(&["exact", "--n", "4", "--p", "0.75", "--alpha", "0", "--beta", "0.6", "--delta", "0.3", "--quantity", "spectral-gap"]);
    assert!(gap.status.success());
    assert!(stdout(&gap).trim().parse::<f64>().unwrap() > 0.0);
    let tmix = xlab(&["exact", "--n", "4", "--p", "0.75", "--quantity", "mixing-time", "--eps", "0.25"]);
    assert!(stdout(&tmix).trim().parse::<f64>().unwrap() > 0.0);
    let wilson = xlab(&["exact", "--n", "64", "--p", "0.5", "--alpha", "0", "--beta", "0.6", "--delta", "0.3", "--quantity", "wilson"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&wilson)).unwrap();
    assert_eq!(v["certificate"]["variant"], "OneSided");
}

#[test]
fn same_seed_same_bytes() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = xlab(&["run", "--preset", "kac-return", "--seed", "11", "--replicas", "500", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.code().is_some_and(|c| c < 2));
    }
    let read = |p: &std::path::Path| fs::read(p.join("summary.json")).unwrap();
    assert_eq!(read(dirs[0].path()), read(dirs[1].path()));
}
