use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cdsim_harness::cli::GRID_SUMMARY;
use cdsim_harness::experiment::{CONFIG_ECHO, RUNS_DIR, SUMMARY_FILE};

fn cdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdsim")).args(args).output().expect("spawn cdsim")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s3");
    let o = cdsim(&["simulate", "--scenario", "3", "--seeds", "2", "--rounds", "20", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join(CONFIG_ECHO).is_file());
    assert_eq!(fs::read_to_string(out.join(SUMMARY_FILE)).unwrap().lines().count(), 3);
    assert_eq!(fs::read_dir(out.join(RUNS_DIR)).unwrap().count(), 2);
}

#[test]
fn grid_over_two_axes_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = cdsim(&[
        "grid",
        "--diversity",
        "low,medium,high",
        "--volatility",
        "low,moderate,high",
        "--seeds",
        "1",
        "--rounds",
        "20",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(dir.path().join(GRID_SUMMARY)).unwrap();
    assert_eq!(rows.lines().count(), 9);
}

#[test]
fn analyze_rejects_an_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = cdsim(&["analyze", path(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no per-round run files"));
}

#[test]
fn analyze_prints_a_bin_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = cdsim(&["simulate", "--scenario", "1", "--seeds", "3", "--out", path(dir.path())]);
    assert!(o.status.success());
    let o = cdsim(&["analyze", path(dir.path()), "--bins", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# 3 runs"));
}

#[test]
fn replay_reproduces_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = cdsim(&["simulate", "--scenario", "2", "--seeds", "2", "--rounds", "20", "--out", path(dir.path())]);
    assert!(o.status.success());
    let o = cdsim(&["replay", path(&dir.path().join(CONFIG_ECHO)), "--sequential"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("matches"));
}

#[test]
fn theory_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("theory.csv");
    let o = cdsim(&["theory", "--beta", "0,0.5", "--seeds", "4", "--rounds", "10", "--out", path(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 3);
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario = 1\nunknown_key = 3\n").unwrap();
    let o = cdsim(&["simulate", "--config", path(&cfg)]);
    assert!(!o.status.success());
}
