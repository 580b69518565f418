use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use trajflow::harness::RunReport;

fn trajflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_GA: &str = r#"
problem = "narma"
method = "ga"

[narma]
horizon = 60
n_train = 30
hidden = 3

[ga]
population = 12
generations = 6
"#;

#[test]
fn gen_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (dir, seed) in [("a", "4"), ("b", "4"), ("c", "5")] {
        let out = trajflow(&["gen", "--seed", seed, "--out", dir], d);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |dir: &str| std::fs::read(d.join(dir).join("dataset/dataset.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn horizon_must_exceed_washout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[narma]\nhorizon = 10\nwashout = 10\n");
    let out = trajflow(&["gen", "--config", &cfg, "--out", "x"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("washout"));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn boucwen_metadata_records_oscillator_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = trajflow(&["gen", "--problem", "boucwen", "--out", "bw"], tmp.path());
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(tmp.path().join("bw/dataset/meta.json")).unwrap();
    let meta: Value = serde_json::from_str(&text).unwrap();
    let params = &meta["generator"]["params"];
    let expected = [
        ("m_l", 2.0),
        ("c_l", 10.0),
        ("k_l", 5e4),
        ("alpha", 5e4),
        ("beta", 1e3),
        ("gamma_bw", 0.8),
        ("delta", -1.1),
        ("v_exp", 1.0),
    ];
    for (k, v) in expected {
        assert_eq!(params[k].as_f64(), Some(v), "{k}");
    }
    assert_eq!(meta["generator"]["sample_rate"].as_f64(), Some(750.0));
}

#[test]
fn ga_runs_are_finite_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write(d, "ga.toml", SMALL_GA);
    for seed in 1..=5 {
        let dir = format!("ga-{seed}");
        let out = trajflow(&["train", "--config", &cfg, "--seed", &seed.to_string(), "--out", &dir], d);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let r = RunReport::load(&d.join(&dir).join("report.json")).unwrap();
        let m = r.metrics.unwrap();
        assert!(m.train_mse.is_finite() && m.test_mse.is_finite());
        assert!(r.flags.is_empty());
    }
    let out = trajflow(&["train", "--config", &cfg, "--seed", "3", "--out", "again"], d);
    assert_eq!(code(&out), 0);
    let a = std::fs::read(d.join("ga-3/weights.json")).unwrap();
    let b = std::fs::read(d.join("again/weights.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn report_aggregates_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write(d, "ga.toml", SMALL_GA);
    for seed in ["1", "2", "3"] {
        let out = trajflow(&["train", "--config", &cfg, "--seed", seed, "--out", &format!("r{seed}")], d);
        assert_eq!(code(&out), 0);
    }
    let out = trajflow(&["report", "r1", "r2", "r3", "--out", "all"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let comparison = std::fs::read_to_string(d.join("all/comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 4);
    let summary = std::fs::read_to_string(d.join("all/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(d.join("all/series.csv").exists());

    let out = trajflow(&["report", "r2", "--out", "one"], d);
    assert_eq!(code(&out), 0);
    let comparison = std::fs::read_to_string(d.join("one/comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 2);
}

#[test]
fn report_stability_bound_matches_formula() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write(d, "ga.toml", SMALL_GA);
    assert_eq!(code(&trajflow(&["train", "--config", &cfg, "--out", "run"], d)), 0);
    let r = RunReport::load(&d.join("run/report.json")).unwrap();
    let (ku, ky) = (r.k_u.unwrap(), r.k_y.unwrap());
    // 30 training samples, 3 hidden nodes, 10 input lags and 5 output lags
    let (n, m, p) = (30.0f64, 3.0f64, 15.0f64);
    let expected = n * (n * m).sqrt() * (m.sqrt() + (ky * (ku * p.sqrt() + m)).sqrt()).powi(2);
    let got = r.gamma_max.unwrap();
    assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
}

#[test]
fn toy_dtb_finds_both_wells() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write(d, "toy.toml", "problem = \"toy\"\nmethod = \"dtb\"\nseed = 2\n\n[explore.saddle]\nq = 6\n");
    let out = trajflow(&["train", "--config", &cfg, "--out", "toy"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = RunReport::load(&d.join("toy/report.json")).unwrap();
    assert_eq!((r.minima, r.saddles), (2, 1));
    let out = trajflow(&["inspect", "toy/registry.json"], d);
    assert_eq!(code(&out), 0);
    assert!(!out.stdout.is_empty());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&trajflow(&["--help"], d)), 0);
    assert_eq!(code(&trajflow(&["frobnicate"], d)), 1);
    assert_eq!(code(&trajflow(&["train", "--config", "missing.toml"], d)), 1);
    let cfg = write(d, "typo.toml", "seeed = 3\n");
    assert_eq!(code(&trajflow(&["train", "--config", &cfg], d)), 1);
    assert_eq!(code(&trajflow(&["inspect", "nothing.json"], d)), 1);
    assert_eq!(code(&trajflow(&["report", "nowhere"], d)), 1);
    assert_eq!(code(&trajflow(&["gen", "--problem", "toy"], d)), 1);
    let out = trajflow(
        &["bound", "--samples", "1", "--hidden", "1", "--inputs", "1", "--k-u", "1", "--k-y", "1"],
        d,
    );
    assert_eq!(code(&out), 0);
    // 1·1·(1 + √2)²
    let g: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((g - (1.0 + 2f64.sqrt()).powi(2)).abs() < 1e-12);
    assert_eq!(code(&trajflow(&["bound", "--samples", "0", "--hidden", "1", "--inputs", "1", "--k-u", "1", "--k-y", "1"], d)), 1);
}
