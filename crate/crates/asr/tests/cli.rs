use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn asr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asr")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// A 12-day contract small enough to solve in a fraction of a second.
fn small_config(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "contract": {"notional": 9.0e7, "days": 12, "exercise": {"first": 5, "last": 11}},
        "market": {"s0": 45.0, "sigma": 0.6, "volume": 1.5e6, "eta": 0.1, "phi": 0.75},
        "risk": {"gamma": 2.5e-7, "rho_lo": -0.25, "rho_hi": 0.25, "rho_exec": 0.25},
        "grid": {"n_q": 41, "n_a": 9, "q_max": 2.5e6, "xi": 3.0},
        "run": {"cube": "out/small.cube", "n_paths": 40, "seed": 3},
        "sweep": {"param": "eta", "values": [0.05, 0.1]}
    });
    let path = dir.join("small.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .to_string()
}

#[test]
fn solve_then_simulate_then_price() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    let text = ok(&asr(&["solve", "--config", "small.json", "--out", "report.json"], d));
    assert!(d.join("out/small.cube").exists());
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    let pi = report["pi"].as_f64().unwrap();
    assert_eq!(report["pi_over_f"].as_f64().unwrap(), pi / 9.0e7);
    assert!(field(&text, "pi_over_f").ends_with('%'));

    // The root-only price equals the full solve.
    let text = ok(&asr(&["price", "--config", "small.json", "--out", "price.json"], d));
    let price: Value = serde_json::from_str(&fs::read_to_string(d.join("price.json")).unwrap()).unwrap();
    assert_eq!(price["pi"].as_f64().unwrap(), pi);
    assert_eq!(field(&text, "days"), "12");

    // A falling path settles on the first exercise day.
    let mut csv = String::from("day,price\n");
    for n in 1..=12 {
        csv += &format!("{n},{}\n", 45.0 - 0.3 * n as f64);
    }
    fs::write(d.join("down.csv"), csv).unwrap();
    let text = ok(&asr(&["simulate", "--cube", "out/small.cube", "--path", "down.csv", "--out", "down"], d));
    assert_eq!(field(&text, "n_star"), "5");
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.join("down/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["replay"]["n_star"], 5);
    let traj = fs::read_to_string(d.join("down/trajectory.csv")).unwrap();
    assert!(traj.starts_with("day,S,A,q,order,X,exercised\n"));
    assert_eq!(traj.lines().count(), 1 + 6);

    // Seeded runs are reproducible.
    let a = ok(&asr(&["simulate", "--config", "small.json", "--seed", "7", "--out", "s1"], d));
    let b = ok(&asr(&["simulate", "--config", "small.json", "--seed", "7", "--out", "s2"], d));
    assert_eq!(a.replace("s1", "s2"), b);
    for f in ["summary.json", "trajectory.csv", "path.csv"] {
        assert_eq!(fs::read(d.join("s1").join(f)).unwrap(), fs::read(d.join("s2").join(f)).unwrap(), "{f}");
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.join("s1/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["monte_carlo"]["n_paths"], 40);
}

#[test]
fn sweep_and_discount() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    ok(&asr(&["sweep", "--config", "small.json", "--out", "sweep.csv"], d));
    let table = fs::read_to_string(d.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "value,pi,pi_over_f");
    assert_eq!(rows.len(), 3);
    let text = ok(&asr(&["sweep", "--config", "small.json", "--param", "gamma", "--values", "0,2.5e-7"], d));
    assert_eq!(text.lines().count(), 2);

    let text = ok(&asr(&["discount", "--config", "small.json", "--out", "discount.json"], d));
    let beta: f64 = field(&text, "beta_star").parse().unwrap();
    assert!(beta > 0.0 && beta < 0.05);
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("discount.json")).unwrap()).unwrap();
    assert!(report["trace"].as_array().unwrap().len() >= 3);
}

#[test]
fn invalid_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();

    v["grid"]["n_a"] = 3.into();
    fs::write(d.join("bad_na.json"), v.to_string()).unwrap();
    let out = asr(&["solve", "--config", "bad_na.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_a"));

    v["grid"]["n_a"] = 9.into();
    v["contract"]["exercise"] = serde_json::json!([]);
    fs::write(d.join("bad_ex.json"), v.to_string()).unwrap();
    let out = asr(&["price", "--config", "bad_ex.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exercise"));

    let out = asr(&["simulate", "--cube", "missing.cube", "--seed", "1"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.cube"));

    let out = asr(&["serve", "--cube", "missing.cube", "--bind", "127.0.0.1:0"], d);
    assert!(!out.status.success());
}

#[test]
fn zero_notional_prices_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["contract"]["notional"] = 0.0.into();
    fs::write(d.join("zero.json"), v.to_string()).unwrap();
    let text = ok(&asr(&["price", "--config", "zero.json"], d));
    let pi: f64 = field(&text, "pi").parse().unwrap();
    assert_eq!(pi.abs(), 0.0);
}
