//! The `neurofield` binary: files written, determinism and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use neurofield::lifting::build_cake_bank;

fn neurofield(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurofield"))
        .env("NEUROFIELD_OUT", root)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SMALL_RUN: &[&str] = &["--stimulus", "sbc", "--model", "lhe2d", "--n", "64", "--out", "runs"];

#[test]
fn gen_writes_image_and_sidecar_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&neurofield(dir.path(), &["gen", "white", "--n", "200", "--pgm"])), 0);
    let png = fs::read(dir.path().join("white.png")).unwrap();
    let sidecar = fs::read_to_string(dir.path().join("white.targets")).unwrap();
    assert!(sidecar.contains("target left"));
    assert!(sidecar.contains("relation darker-than right"));
    assert!(dir.path().join("white.pgm").exists());
    assert_eq!(code(&neurofield(dir.path(), &["gen", "white", "--n", "200"])), 0);
    assert_eq!(fs::read(dir.path().join("white.png")).unwrap(), png);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&neurofield(dir.path(), &["gen", "hermann"])), 2);
    assert_eq!(code(&neurofield(dir.path(), &["run", "--model", "heat"])), 2);
    assert_eq!(code(&neurofield(dir.path(), &["run", "--set", "model.dt=-1"])), 2);
    assert_eq!(code(&neurofield(dir.path(), &["sweep", "--param", "lambda", "--values"])), 2);
}

#[test]
fn run_writes_manifest_and_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run"];
    args.extend_from_slice(SMALL_RUN);
    let out = neurofield(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let runs = dir.path().join("runs");
    let manifest = fs::read_to_string(runs.join("sbc_lhe2d.manifest")).unwrap();
    for key in ["beta = 1.5", "display_scale = 1", "fit_error = ", "lambda = 0.5"] {
        assert!(manifest.contains(key), "missing {key}");
    }
    let summary = fs::read_to_string(runs.join("sbc_lhe2d_summary.csv")).unwrap();
    assert!(summary.contains("sbc,lhe2d,comparison,left|right,"));
    assert!(summary.contains(",a-lighter,lighter-than,true"));
    let trace = fs::read_to_string(runs.join("sbc_lhe2d_trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,relative_update,energy\n0,,"));
    assert_eq!(fs::read_to_string(runs.join("sbc_lhe2d_profile.csv")).unwrap().lines().count(), 65);

    // The manifest is itself a config that reproduces the run.
    let png = fs::read(runs.join("sbc_lhe2d.png")).unwrap();
    let config = runs.join("sbc_lhe2d.manifest");
    let again = neurofield(dir.path(), &["run", "--config", config.to_str().unwrap(), "--out", "again"]);
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read(dir.path().join("again/sbc_lhe2d.png")).unwrap(), png);
}

#[test]
fn max_iters_exhaustion_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--max-iters", "1"];
    args.extend_from_slice(SMALL_RUN);
    assert_eq!(code(&neurofield(dir.path(), &args)), 3);
}

#[test]
fn single_value_sweep_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut run = vec!["run", "--sigma-omega", "6"];
    run.extend_from_slice(SMALL_RUN);
    assert_eq!(code(&neurofield(dir.path(), &run)), 0);
    let mut sweep = vec!["sweep", "--param", "sigma_omega", "--values", "6"];
    sweep.extend_from_slice(SMALL_RUN);
    assert_eq!(code(&neurofield(dir.path(), &sweep)), 0);
    let runs = dir.path().join("runs");
    assert_eq!(
        fs::read(runs.join("sbc_lhe2d.png")).unwrap(),
        fs::read(runs.join("sbc_lhe2d_sigma_omega-6.png")).unwrap()
    );
    let csv = fs::read_to_string(runs.join("sbc_lhe2d_sweep_sigma_omega.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), neurofield::cli::SWEEP_HEADER);
    assert!(csv.lines().nth(1).unwrap().starts_with("model.sigma_omega,6,"));
}

#[test]
fn check_passes_and_detects_a_corrupted_bank() {
    let dir = tempfile::tempdir().unwrap();
    let out = neurofield(dir.path(), &["check"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("PASS").count(), 4);

    let path = dir.path().join("bank.cake");
    build_cake_bank(16, 6, 4).unwrap().save(&path).unwrap();
    assert_eq!(code(&neurofield(dir.path(), &["check", "--bank", path.to_str().unwrap()])), 0);
    let mut bytes = fs::read(&path).unwrap();
    // Overwrite one real filter coefficient past the 16-byte header.
    let at = 16 + 8 * 37;
    bytes[at..at + 8].copy_from_slice(&2.0f64.to_le_bytes());
    fs::write(&path, &bytes).unwrap();
    let out = neurofield(dir.path(), &["check", "--bank", path.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL reconstruction"));
}
