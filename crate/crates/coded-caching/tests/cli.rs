//! End-to-end checks of the command-line interface: exit codes,
//! determinism of emitted files, and flag overrides.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_coded-caching");

const SMALL: &str = r#"
[env]
p = 20
c = 4
k = 1
d = 2
l = 2
b = 1.0
m = 50
skewness = [1.36, 2.3]
transition_seed = 7
request_mode = "zipf_multinomial"
white_box = true

[agent]
kind = "qlearning"

[schedule]
horizon = 400
switch_slot = 200
seeds = [1, 2]

[output]
metrics_window = 50

[sweep]
k_values = [1, 2, 3]
schemes = ["qlearning", "mpcc"]
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn validate_config_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = run(&["validate-config", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[env]"));
    assert!(text.contains("kind = \"qlearning\""));
}

#[test]
fn config_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("horizon = 400", "horizon = 100"));
    let out = run(&["validate-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let missing = dir.path().join("nope.toml");
    let out = run(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_scenario_exits_3() {
    // K*L exceeds C*l_max: no valid caching action exists
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("k = 1", "k = 5"));
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn run_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let r = run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(r.status.success(), "{r:?}");
        assert!(r.stdout.is_empty());
    }
    let a = std::fs::read(out1.join("qlearning_seed9.csv")).unwrap();
    let b = std::fs::read(out2.join("qlearning_seed9.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn agent_and_discipline_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let r = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--agent",
        "mpcc",
        "--discipline",
        "uncoded",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(r.status.success(), "{r:?}");
    assert!(out.join("mpcc_seed1.csv").exists());

    let r = run(&["run", "--config", cfg.to_str().unwrap(), "--agent", "bogus"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn sweep_writes_long_format_and_warns_on_infeasible_k() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("s");
    let r = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{r:?}");
    // K=3 is infeasible (K*L=6 > C*l_max=4) and must surface as a warning
    assert!(String::from_utf8_lossy(&r.stderr).contains("warning"));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(text.starts_with("scheme,k,seed,converged_rho,status\n"));
    let ok_rows = text.lines().filter(|l| l.ends_with(",ok")).count();
    assert_eq!(ok_rows, 2 * 2 * 2); // schemes x feasible K x seeds
    assert!(text.contains("skipped"));
    assert!(out.join("sweep_summary.csv").exists());
}

#[test]
fn compare_emits_similarity_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("c");
    let r = run(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(r.status.success(), "{r:?}");
    let text = std::fs::read_to_string(out.join("compare_qlearning_seed4.csv")).unwrap();
    let line = text.lines().nth(1).unwrap();
    let sim_field = line.split(',').nth(3).unwrap();
    assert!(!sim_field.is_empty());
    let v: f64 = sim_field.parse().unwrap();
    assert!((0.0..=1.0 + 1e-12).contains(&v));
}
