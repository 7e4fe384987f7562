//! The `relkin` binary: exit codes, validation and output files.

use std::path::PathBuf;
use std::process::{Command, Output};

use relkin_cli::report::read_dense_dump;

fn relkin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relkin")).args(args).output().expect("running relkin")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("relkin-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn dry_run_validates_without_writing() {
    let out = scratch("dry");
    let r = relkin(&["eos-scan", "--dry-run", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_a_configuration_error() {
    let r = relkin(&["bessel-verify", "--dry-run", "--set", "z_mx=3"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("z_mx"));
}

#[test]
fn bad_value_is_a_configuration_error() {
    let r = relkin(&["euler-run", "--dry-run", "--set", "dims=2"]);
    assert_eq!(r.status.code(), Some(2));
    let r = relkin(&["collision-check", "--dry-run", "--set", "kernel=medium"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn config_file_is_read_and_overridden() {
    let dir = scratch("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# short scan\npoints = 50\nz_min = 0.5\n").unwrap();
    let out = dir.join("out");
    let r = relkin(&["eos-scan", "--config", cfg.to_str().unwrap(), "--set", "points=40", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let scan = std::fs::read_to_string(out.join("eos-scan/eos_scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 41);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn injected_fault_fails_with_status_one() {
    let out = scratch("fault");
    let r = relkin(&["bessel-verify", "--set", "fault=recursion", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    let report = std::fs::read_to_string(out.join("bessel-verify/report.txt")).unwrap();
    assert!(report.contains("FAIL recursion_residual"));
    assert!(report.trim_end().ends_with("FAILED"));
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn euler_run_writes_final_state() {
    let out = scratch("euler");
    let r = relkin(&["euler-run", "--set", "preset=constant", "--set", "cells=16", "--set", "steps=20", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    let (dims, data) = read_dense_dump(&std::fs::read(out.join("euler-run/final_state.bin")).unwrap()).unwrap();
    assert_eq!(dims, vec![5, 16]);
    assert_eq!(data.len(), 80);
    let steps = std::fs::read_to_string(out.join("euler-run/steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 22);
    let _ = std::fs::remove_dir_all(&out);
}
