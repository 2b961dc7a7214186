//! End-to-end runs of the `atmolis` binary: subcommands, flag overrides,
//! and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_atmolis")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn atmolis")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("atmolis_cli_{name}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL_CONFIG: &str = r#"
seed = 3

[problem.synthetic]
wavelength_count = 50
layer_count = 12
line_count = 4
ensemble_size = 30

[method]
name = "lis"
rank = 3
reference_samples = 60

[sampler]
chain_length = 2000

[output]
dir = "run"

[compare]
ranks = [1, 2]
"#;

#[test]
fn full_pipeline_runs() {
    let dir = workdir("pipeline");
    fs::write(dir.join("exp.toml"), SMALL_CONFIG).unwrap();

    let out = run_in(&dir, &["simulate", "-c", "exp.toml"]);
    assert!(out.status.success(), "simulate: {out:?}");
    assert!(dir.join("run/simulate/spectrum_noisy.csv").exists());

    let out = run_in(&dir, &["retrieve", "-c", "exp.toml", "--method", "full"]);
    assert!(out.status.success(), "retrieve full: {out:?}");

    let out = run_in(&dir, &["retrieve", "-c", "exp.toml"]);
    assert!(out.status.success(), "retrieve lis: {out:?}");
    assert!(dir.join("run/retrieve_lis_r3/chain_reduced.csv").exists());

    let out = run_in(
        &dir,
        &["retrieve", "-c", "exp.toml", "--method", "prired", "--rank", "2"],
    );
    assert!(out.status.success(), "retrieve prired: {out:?}");
    assert!(dir.join("run/retrieve_prired_r2").exists());

    let out = run_in(
        &dir,
        &["retrieve", "-c", "exp.toml", "--method", "lis", "--threshold", "1.0"],
    );
    assert!(out.status.success(), "retrieve lis threshold: {out:?}");
    assert!(dir.join("run/retrieve_lis_tau1").exists());

    let out = run_in(&dir, &["compare", "-c", "exp.toml"]);
    assert!(out.status.success(), "compare: {out:?}");
    let table = fs::read_to_string(dir.join("run/compare/compare.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 4);

    let out = run_in(&dir, &["report", "--out", "run/retrieve_lis_r3"]);
    assert!(out.status.success(), "report: {out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("min_ess"));

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn init_writes_template_and_respects_force() {
    let dir = workdir("init");
    let out = run_in(&dir, &["init", "-c", "exp.toml"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.join("exp.toml")).unwrap();
    assert!(text.contains("[sampler]"));

    // Refuses to clobber without --force (I/O error, exit 4).
    let out = run_in(&dir, &["init", "-c", "exp.toml"]);
    assert_eq!(out.status.code(), Some(4));
    let out = run_in(&dir, &["init", "-c", "exp.toml", "--force"]);
    assert!(out.status.success());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn config_errors_exit_2() {
    let dir = workdir("config_err");
    fs::write(dir.join("bad.toml"), "[method]\nname = \"nope\"\n").unwrap();
    let out = run_in(&dir, &["simulate", "-c", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    fs::write(dir.join("conflict.toml"), "[method]\nname = \"full\"\nrank = 2\n").unwrap();
    let out = run_in(&dir, &["retrieve", "-c", "conflict.toml"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    // Flag overrides can also produce config errors.
    fs::write(dir.join("ok.toml"), SMALL_CONFIG).unwrap();
    let out = run_in(&dir, &["retrieve", "-c", "ok.toml", "--method", "bogus"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn io_errors_exit_4() {
    let dir = workdir("io_err");
    let out = run_in(&dir, &["simulate", "-c", "missing.toml"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");

    // Retrieval without a measurement file.
    fs::write(dir.join("exp.toml"), SMALL_CONFIG).unwrap();
    let out = run_in(&dir, &["retrieve", "-c", "exp.toml"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn seed_override_changes_outputs() {
    let dir = workdir("seed_override");
    fs::write(dir.join("exp.toml"), SMALL_CONFIG).unwrap();
    let out = run_in(&dir, &["simulate", "-c", "exp.toml", "--out", "a", "--seed", "3"]);
    assert!(out.status.success());
    let out = run_in(&dir, &["simulate", "-c", "exp.toml", "--out", "b", "--seed", "4"]);
    assert!(out.status.success());
    let a = fs::read_to_string(dir.join("a/simulate/spectrum_noisy.csv")).unwrap();
    let b = fs::read_to_string(dir.join("b/simulate/spectrum_noisy.csv")).unwrap();
    assert_ne!(a, b);
    let _ = fs::remove_dir_all(&dir);
}
