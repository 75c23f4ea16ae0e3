use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kstree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstree")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn critical_reports_n0_witness() {
    for args in [vec!["--preset", "critical-n0", "critical"], vec!["--lambda", "10*pi^2", "critical"]] {
        let out = kstree(&args);
        assert_eq!(out.status.code(), Some(0));
        let v = stdout_json(&out);
        let sets = v["sets"].as_array().unwrap();
        assert_eq!(sets.len(), 7);
        let n0 = sets.iter().find(|s| s["set"] == "N0").unwrap();
        assert_eq!(n0["member"], true);
        assert_eq!(n0["witness"], serde_json::json!([1, 3]));
        assert_eq!(n0["scaled_value"].as_f64().unwrap(), 10.0);
    }
}

#[test]
fn obstruction_exits_with_null_direction() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstree(&["--preset", "model2-obstruct-a", "--out", dir.path().to_str().unwrap(), "obstruct"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "refused");
    assert_eq!(v["code"], "uncontrollable_direction");
    assert_eq!(v["stage"], "targets");
    let d = &v["detail"];
    assert_eq!(d["multiplicity"].as_u64().unwrap() - d["rank"].as_u64().unwrap(), 1);
    let norm: f64 = d["direction"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap().powi(2)).sum();
    assert!((norm - 1.0).abs() < 1e-12);
    assert_eq!(read_json(&dir.path().join("refusal.json")), v);
}

#[test]
fn model_one_obstruction_and_full_rank_pattern() {
    assert_eq!(kstree(&["--preset", "model1-obstruct", "obstruct"]).status.code(), Some(2));
    let out = kstree(&["--preset", "model2-null", "obstruct"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["obstructed"], false);
    assert!(v["eigenspaces"].as_array().unwrap().iter().all(|e| e["deficiency"] == 0));
}

#[test]
fn zero_simulation_writes_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstree(&["--preset", "zero", "--out", dir.path().to_str().unwrap(), "simulate", "--steps", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header, ["t", "mode", "coefficient"]);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["max_residual"].as_f64().unwrap(), 0.0);
    assert!(!dir.path().join("synthesis.json").exists());
}

#[test]
fn end_to_end_presets_reach_null_state() {
    for (preset, silent) in [
        ("model1-null", vec!["u3"]),
        ("model2-null", vec!["a3", "b3"]),
        ("model2-2n3-a", vec!["a3", "a2", "b3"]),
        ("model2-2n3-b", vec!["a3", "b2", "b3"]),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let out = kstree(&["--preset", preset, "--out", dir.path().to_str().unwrap(), "verify"]);
        assert_eq!(out.status.code(), Some(0), "{preset}: {}", String::from_utf8_lossy(&out.stdout));
        let report = read_json(&dir.path().join("report.json"));
        assert_eq!(report["retained"], 8);
        assert!(report["max_residual"].as_f64().unwrap() < 1e-6, "{preset}");
        for name in ["eigenspaces.json", "targets.json", "biorthogonal.json", "synthesis.json", "trajectory.csv"] {
            assert!(dir.path().join(name).exists(), "{preset}: {name}");
        }
        let (header, rows) = read_csv(&dir.path().join("controls.csv"));
        assert_eq!(rows.len(), 1000);
        for (c, name) in header.iter().enumerate().skip(1) {
            let zero = rows.iter().all(|r| r[c].parse::<f64>().unwrap() == 0.0);
            assert_eq!(zero, silent.contains(&name.as_str()), "{preset}: channel {name}");
        }
    }
}

#[test]
fn interval_demo_solves_outside_n3() {
    let out = kstree(&["interval-demo"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 6);
    for r in runs.iter().filter(|r| r["in_n3"] == false) {
        assert_eq!(r["status"], "passed");
        assert!(r["max_residual"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    kstree(&["--preset", "model2-null", "--out", a.path().to_str().unwrap(), "simulate", "--dump-state", "x-grid=4"]);
    kstree(&[
        "--preset",
        "model2-null",
        "--sequential",
        "--out",
        b.path().to_str().unwrap(),
        "simulate",
        "--dump-state",
        "x-grid=4",
    ]);
    for name in ["synthesis.json", "controls.csv", "report.json", "trajectory.csv", "state.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty() && x == y, "{name}");
    }
}

#[test]
fn spectrum_csv_matches_closed_form() {
    let out = kstree(&["--lambda", "3", "spectrum", "--problem", "E1", "--count", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["problem", "index", "branch", "sigma", "alpha", "beta", "gamma", "value_at_L", "dxx_at_L"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    // n = 0 is the zero eigenvalue, followed by five positive ones
    assert_eq!(rows.len(), 6);
    assert_eq!(&rows[0][2], "zero");
    for row in &rows {
        let n: f64 = row[1].parse().unwrap();
        let sigma: f64 = row[3].parse().unwrap();
        let k = n * PI;
        let exact = k.powi(4) - 3.0 * k * k;
        assert!((sigma - exact).abs() <= 1e-12 * exact.abs());
    }
}

#[test]
fn experiment_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(
        &path,
        r#"{"config": {"edges": 3, "length": 1.0, "lambda": "1", "model": "II", "horizon": 1.0},
            "y0": {"basis_coefficients": [0.5, -1.0, 2.0]}, "modes": 4, "inactive_channels": ["b3"],
            "samples": 11}"#,
    )
    .unwrap();
    let out = kstree(&["--config", path.to_str().unwrap(), "--format", "csv", "synthesize"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,a1,b1,a2,b2,a3,b3");
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn invalid_input_exits_one_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"config": {"edges": 3, "length": 1.0, "lambda": 1.0, "model": "I", "horizon": 1.0}, "modes": -2}"#)
        .unwrap();
    let out = kstree(&["--config", path.to_str().unwrap(), "synthesize"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["code"], "invalid_input");
    assert!(err["message"].as_str().unwrap().contains("$.modes"));

    assert_eq!(kstree(&["--inactive", "u7", "synthesize"]).status.code(), Some(1));
    assert_eq!(kstree(&["--no-such-flag", "critical"]).status.code(), Some(1));
    assert_eq!(kstree(&["--preset", "nope", "critical"]).status.code(), Some(1));
    assert_eq!(kstree(&["--config", "/nonexistent/spec.json", "critical"]).status.code(), Some(1));
    assert_eq!(kstree(&["simulate", "--dump-state", "x=3"]).status.code(), Some(1));
}

#[test]
fn conditioning_is_a_refusal() {
    let out = kstree(&["--preset", "interval-dirichlet", "--lambda", "9*pi^2/4", "biorthogonal"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["code"], "conditioning");
    assert_eq!(v["stage"], "biorthogonal");
}
