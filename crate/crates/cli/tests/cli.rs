//! Black-box checks of the binary: subcommand output, spec file handling,
//! and the exit-code contract.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> PathBuf {
    let mut path = PathBuf::from(env!("CARGO_BIN_EXE_cma-explain"));
    assert!(path.exists(), "binary missing at {}", path.display());
    path = path.canonicalize().unwrap();
    path
}

#[test]
fn problems_lists_all_24_functions() {
    let out = Command::new(bin()).arg("problems").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 25);
    assert!(text.contains("1,sphere,separable,false"));
}

#[test]
fn train_without_prior_stages_exits_with_missing_input_code() {
    let dir = tempfile::TempDir::new().unwrap();
    let out = Command::new(bin())
        .args(["train", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn malformed_spec_file_exits_with_spec_code() {
    let dir = tempfile::TempDir::new().unwrap();
    let spec_path = dir.path().join("bad.spec");
    fs::write(&spec_path, "budgets = not-a-number\n").unwrap();
    let out = Command::new(bin())
        .args(["benchmark", "--spec"])
        .arg(&spec_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_runs_a_spec_file_end_to_end() {
    let dir = tempfile::TempDir::new().unwrap();
    let spec_path = dir.path().join("tiny.spec");
    let out_dir = dir.path().join("out");
    fs::write(
        &spec_path,
        format!(
            "config = elitist=false;mirrored=off;base_sampler=gaussian;weights=default;restart=off;bounds=saturate;ssa=csa\n\
             functions = 1\ninstances = 1,2\ndimensions = 2\nbudgets = 100\nruns = 1\n\
             ela_repetitions = 2\nseed = 7\nout = {}\ntopk = 3\naxes = elitist\n\
             grid = restricted\nshap_mode = abs\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["benchmark", "--spec"])
        .arg(&spec_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
}
