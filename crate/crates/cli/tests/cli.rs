use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qci_lab::config::{ExperimentConfig, Subcommand};
use qci_lab::experiments::{self, MODULE_OPS};

const BIN: &str = env!("CARGO_BIN_EXE_qci-lab");

fn qci(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove(qci_lab::THREADS_VAR).output().expect("run qci-lab")
}

fn config(sub: Subcommand, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(sub);
    for (k, v) in pairs {
        cfg.set(k, v).unwrap();
    }
    cfg
}

#[test]
fn subcommands_reach_every_module_op() {
    let runs = [
        config(Subcommand::Validate, &[]),
        config(Subcommand::Returnmap, &[("psi", "0.2:1.4:8")]),
        config(Subcommand::Loops, &[("theta", "0.1:3.0:3")]),
        config(Subcommand::Rank, &[("scan.samples", "90")]),
        config(Subcommand::Morse, &[("morse.grid", "180")]),
        config(Subcommand::Modes, &[("grid_n", "400"), ("m", "0,1,3")]),
        config(Subcommand::Quasimode, &[]),
        config(Subcommand::Lattice, &[("action", "count"), ("oracle", "true"), ("h_grid", "0.1:0.05:3")]),
        config(Subcommand::Lattice, &[("action", "fit")]),
        config(Subcommand::Scaling, &[]),
        config(Subcommand::Frames, &[]),
    ];
    let mut reached = BTreeSet::new();
    for cfg in &runs {
        let out = experiments::run(cfg).unwrap_or_else(|e| panic!("{}: {e:#}", cfg.subcommand));
        assert!(out.artifacts.iter().any(|a| a.name == "config.txt"));
        reached.extend(out.ops);
    }
    let all: BTreeSet<_> = MODULE_OPS.into_iter().collect();
    let missing: Vec<_> = all.difference(&reached).collect();
    assert!(missing.is_empty(), "ops never reached: {missing:?}");
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

#[test]
fn returnmap_on_the_sphere_is_zoll() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rm");
    let o = qci(&["returnmap", "--profile", "sphere", "--psi", "0.2:1.4:16", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("zoll = true"));
    let phis = csv_column(&out.join("returnmap.csv"), "Phi");
    assert_eq!(phis.len(), 16);
    for phi in phis {
        let phi: f64 = phi.parse().unwrap();
        assert!((phi - std::f64::consts::PI).abs() < 1e-8, "{phi}");
    }
    assert!(out.join("config.txt").exists());
}

#[test]
fn scaling_writes_the_fitted_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let o = qci(&["scaling", "--family", "highest-weight", "--profile", "sphere", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scaling.json")).unwrap()).unwrap();
    let exponent = json["exponent"].as_f64().unwrap();
    assert!((exponent - 0.25).abs() < 0.02, "{exponent}");
}

#[test]
fn unknown_key_is_an_error_naming_the_key() {
    let o = qci(&["rank", "--scan.nonsense", "3", "--dry-run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scan.nonsense"));
}

#[test]
fn unknown_subcommand_exits_one() {
    assert_eq!(qci(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qci(&["--help"]).status.code(), Some(0));
}

#[test]
fn assumption_warnings_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = qci(&["validate", "--profile", "perturbed-sphere(0.1)", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pole-smoothness"));
}

#[test]
fn config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = qci(&["modes", "--grid-n", "400", "--m", "0,2", "--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let path = dir.path().join("modes.cfg");
    fs::write(&path, &text).unwrap();

    let again = qci(&["modes", "--config", path.to_str().unwrap(), "--dry-run"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
    assert_eq!(ExperimentConfig::load(&path).unwrap().to_text(), text);

    let wrong = qci(&["rank", "--config", path.to_str().unwrap(), "--dry-run"]);
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        Command::new(BIN)
            .args(["modes", "--grid-n", "400", "--out", dir.path().join(threads).to_str().unwrap()])
            .env(qci_lab::THREADS_VAR, threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("2").status.code(), Some(0));
    assert_eq!(run("1").status.code(), Some(0));
    let a = fs::read(dir.path().join("1/modes.csv")).unwrap();
    let b = fs::read(dir.path().join("2/modes.csv")).unwrap();
    assert_eq!(a, b);
    let bad = run("zero");
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains(qci_lab::THREADS_VAR));
}
