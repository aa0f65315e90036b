//! Exit codes, overrides and output formats of the `nexlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nexlab"))
        .args(&args[..1])
        .arg("--config")
        .arg(config)
        .args(&args[1..])
        .env("NEXLAB_THREADS", "2")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn passing_run_exits_zero_with_csv_header() {
    let out = run(&["fixpoint"], &configs().join("fixpoint.toml"));
    assert_eq!(out.status.code(), Some(0));
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("# command: fixpoint\n"));
    assert!(body.lines().any(|l| l == nexlab::lab::report::CSV_COLUMNS));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.toml",
        "schema = 1\n[model]\nkind = \"euclidean\"\n[map]\nkind = \"affine1d\"\na = 1.0\nb = 1.0\n[fixpoint]\nmax_iter = 50\n",
    );
    let out = run(&["fixpoint", "--format", "json"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = v["rows"].as_array().unwrap().iter().find(|r| r["name"] == "fixpoint.converged").unwrap();
    assert_eq!(row["pass"], false);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_schema = write(dir.path(), "a.toml", "schema = 7\n");
    assert_eq!(run(&["metric"], &bad_schema).status.code(), Some(2));
    let bad_r = std::fs::read_to_string(configs().join("witness_ball.toml")).unwrap().replace("r = 0.5", "r = 1.5");
    let bad_r = write(dir.path(), "b.toml", &bad_r);
    assert_eq!(run(&["witness"], &bad_r).status.code(), Some(2));
    assert_eq!(run(&["witness"], &dir.path().join("missing.toml")).status.code(), Some(2));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = run(
        &["witness", "--members", "3", "--budget", "100", "--seed", "9", "--format", "json", "--out", out_path.to_str().unwrap()],
        &configs().join("witness_ball.toml"),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["seed"], 9);
    let members = v["rows"].as_array().unwrap().iter().filter(|r| r["name"].as_str().unwrap().starts_with("witness.member")).count();
    assert_eq!(members, 3);
}

#[test]
fn divergence_flag_adds_rows() {
    let out = run(&["metric", "--divergence-demo", "--n-max", "5", "--budget", "200"], &configs().join("metric_constant.toml"));
    assert_eq!(out.status.code(), Some(0));
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.contains("divergence.n5.distance"));
    assert!(!body.contains("divergence.n6"));
}
