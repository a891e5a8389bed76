use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn srh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srh")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = srh(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(dir, "summary.json")).unwrap()
}

#[test]
fn simulate_and_estimate_are_byte_identical_on_rerun() {
    let tmp = TempDir::new().unwrap();
    for run in ["a", "b"] {
        let sim = tmp.path().join(run).join("sim");
        let est = tmp.path().join(run).join("est");
        let base = ["--seed", "9", "--components", "500", "--t-max", "100", "--samples", "400"];
        let mut args = vec!["simulate", "--out", sim.to_str().unwrap()];
        args.extend(base);
        run_ok(&args);
        let mut args = vec!["estimate", "--out", est.to_str().unwrap(), "--density", "f1"];
        args.extend(base);
        run_ok(&args);
    }
    for file in ["sim/model.json", "sim/path.csv", "sim/summary.json", "est/periodogram.csv", "est/frequencies.csv", "est/density.csv", "est/summary.json"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(file)).unwrap(),
            fs::read(tmp.path().join("b").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn estimate_reads_a_path_file_and_finds_planted_tones() {
    let tmp = TempDir::new().unwrap();
    let mut text = String::from("t,x\n");
    for j in 1..=2048 {
        let t = j as f64 * 0.5;
        let x = 4.0 * (0.8 * t).cos() + 2.0 * (1.9 * t + 0.5).cos() + (3.3 * t - 1.0).cos();
        text.push_str(&format!("{t:.16e},{x:.16e}\n"));
    }
    let input = tmp.path().join("tones.csv");
    fs::write(&input, text).unwrap();
    let out = tmp.path().join("est");
    run_ok(&["estimate", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--bandwidth", "silverman"]);
    let rows: Vec<Vec<f64>> = read(&out, "frequencies.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for (row, truth) in rows.iter().zip([0.8, 1.9, 3.3]) {
        assert!((row[0] - truth).abs() < 1e-3, "{row:?}");
    }
    let s = summary(&out);
    assert_eq!(s["frequencies_extracted"], 3);
    assert_eq!(s["bandwidth_rule"], "silverman");
    assert!(s.get("l1_distance").is_none());
}

#[test]
fn limits_table_starts_at_zero_and_matches() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("lim");
    run_ok(&["limits", "--out", out.to_str().unwrap(), "--seed", "4", "--lag", "1"]);
    for file in ["limits.csv", "lag_limits.csv"] {
        let text = read(&out, file);
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows[0][..3], [0.0, 1.0, 1.0]);
        assert!(rows.iter().all(|r| r[3] <= 0.02), "{file}");
    }
    let other = tmp.path().join("lim2");
    run_ok(&["limits", "--out", other.to_str().unwrap(), "--seed", "5"]);
    assert_ne!(read(&out, "limits.csv"), read(&other, "limits.csv"));
}

#[test]
fn multipath_writes_one_row_per_grid_point() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("mp");
    run_ok(&["multipath", "--out", out.to_str().unwrap(), "--components", "500", "--paths", "60"]);
    let text = read(&out, "alpha_sine.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_half,estimate,truth"));
    assert_eq!(lines.count(), 101);
    assert_eq!(summary(&out)["paths"], 60);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "seed = 3\nsamples = 64\nt_max = 32.0\ncomponents = 50\nalpha = 1.1\n").unwrap();
    let out = tmp.path().join("sim");
    run_ok(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "8", "--out", out.to_str().unwrap()]);
    let s = summary(&out);
    assert_eq!(s["seed"], 8);
    assert_eq!(s["samples"], 64);
    assert_eq!(s["alpha"], 1.1);
    assert_eq!(s["delta"], 0.5);
    assert_eq!(read(&out, "path.csv").lines().count(), 65);

    fs::write(&cfg, "sead = 3\n").unwrap();
    let bad = srh(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!bad.status.success());
}

#[test]
fn bad_arguments_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    let o = out.to_str().unwrap();
    for args in [
        vec!["simulate", "--samples", "0", "--out", o],
        vec!["multipath", "--paths", "1", "--out", o],
        vec!["simulate", "--alpha", "2.5", "--out", o],
        vec!["simulate", "--density", "f9", "--out", o],
        vec!["estimate", "--kernel", "box", "--out", o],
        vec!["estimate", "--samples", "100", "--pad", "50", "--out", o],
    ] {
        assert_eq!(srh(&args).status.code(), Some(2), "{args:?}");
    }
    assert!(!out.exists(), "a failed run must not leave artifacts");
}

#[test]
fn missing_input_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    let res = srh(&["estimate", "--input", "/definitely/not/here.csv", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("not/here.csv"));
}
