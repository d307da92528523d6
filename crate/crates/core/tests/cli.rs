use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qubit-hierarchy"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn simulate_writes_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["simulate", "--kappa", "2", "--plot"]);
    let record = stdout_json(&out);
    assert_eq!(record["rows"], 2001);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "time,re_a,im_a,re_c0,im_c0,re_c1,im_c1,re_c2,im_c2,survival"
    );
    assert_eq!(csv.lines().count(), 2002);
    assert!(fs::read_to_string(dir.path().join("trajectory.svg")).unwrap().contains("<svg"));
}

#[test]
fn measure_reports_backflow_above_onset() {
    let dir = tempfile::tempdir().unwrap();
    let record = stdout_json(&bin(dir.path(), &["measure", "--kappa", "2.4"]));
    assert!(record["n_blp"].as_f64().unwrap() > 1e-6);
    assert!(record["qsl_ratio_general"].as_f64().unwrap() < 1.0);
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("measure.json")).unwrap()).unwrap();
    assert_eq!(saved, record);
}

#[test]
fn memory_keeping_measure_runs() {
    let dir = tempfile::tempdir().unwrap();
    let record = stdout_json(&bin(
        dir.path(),
        &["measure", "--env", "memory_keeping", "--kappa", "1.0", "--lambda1", "0.1", "--lambda2", "0.1"],
    ));
    assert!(record["n_blp"].as_f64().unwrap() > 0.0);
}

#[test]
fn phase_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(
        dir.path(),
        &["phase", "--axis1-count", "2", "--axis2-count", "2", "--workers", "2", "--plot"],
    );
    let record = stdout_json(&out);
    assert_eq!(record["points"], 4);
    assert_eq!(record["failed"], 0);
    let csv = fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let grid = fs::read_to_string(dir.path().join("phase_grid.txt")).unwrap();
    assert!(grid.starts_with("# n_blp rows=kappa cols=omega_c\n"));
    assert!(dir.path().join("phase.svg").exists());
}

#[test]
fn one_dimensional_phase_plots_both_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["phase", "--axis2", "none", "--axis1-count", "4", "--plot", "true"]);
    assert_eq!(stdout_json(&out)["points"], 4);
    assert!(dir.path().join("phase_qsl.svg").exists());
}

#[test]
fn crossover_finds_the_onset() {
    let dir = tempfile::tempdir().unwrap();
    let record = stdout_json(&bin(dir.path(), &["crossover", "--crossover-tol", "1e-3"]));
    let kc = record["critical"].as_f64().unwrap();
    assert!((1.2..1.35).contains(&kc), "kappa_c = {kc}");
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let out = bin(dir.path(), &["measure", "--kappa=-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "NonPhysicalParameter");

    let out = bin(dir.path(), &["crossover", "--bracket-lo", "0", "--bracket-hi", "0.5"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"], "NoCrossoverInBracket");

    let out = bin(dir.path(), &["measure", "--env", "lossy"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "Config");

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "kapa = 1.0\n").unwrap();
    let out = bin(dir.path(), &["measure", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.toml");
    let second = dir.path().join("second.toml");
    let a = stdout_json(&bin(
        dir.path(),
        &["measure", "--kappa", "2.2", "--omega-c", "1.1", "--echo-config", first.to_str().unwrap()],
    ));
    let b = stdout_json(&bin(
        dir.path(),
        &["measure", "--config", first.to_str().unwrap(), "--echo-config", second.to_str().unwrap()],
    ));
    assert_eq!(a, b);
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "kappa = 0.0\ntau = 4.0\n").unwrap();
    let record = stdout_json(&bin(dir.path(), &["measure", "--config", cfg.to_str().unwrap(), "--kappa", "2.4"]));
    assert!(record["n_blp"].as_f64().unwrap() > 0.0);
}
