use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stationary")).args(args).output().unwrap()
}

fn json(out: &[u8]) -> Value {
    serde_json::from_slice(out).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(out)))
}

#[test]
fn list_names_every_entry() {
    let o = run(&["list"]);
    assert!(o.status.success());
    let v = json(&o.stdout);
    let names: Vec<&str> = v["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    for n in stationary::catalog::ENTRY_NAMES {
        assert!(names.contains(&n), "{n}");
    }
}

#[test]
fn check_passes_on_kerr_and_rejects_overspin() {
    let o = run(&["check", "kerr", "--M", "1", "--a", "0.5", "--samples", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o.stdout);
    assert_eq!(v["pass"], true);
    assert_eq!(v["tool"], "stationary");
    assert_eq!(v["params"]["a"], 0.5);
    assert!(v["report"]["items"].as_array().unwrap().len() > 5);
    let bad = run(&["check", "kerr", "--M", "1", "--a", "2"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn check_on_the_fd_tier() {
    let o = run(&["check", "--entry", "schwarzschild", "--tol-tier", "fd", "--samples", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o.stdout)["report"]["tier"], "fd");
}

#[test]
fn usage_and_configuration_errors_exit_two() {
    assert_eq!(run(&["check"]).status.code(), Some(2));
    assert_eq!(run(&["check", "no-such-entry"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["check", "kerr", "--entry", "ads"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "kerr", "--monitor", "gradient"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"entry": "schwarzschild", "mass": 1.0}"#).unwrap();
    let o = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mass"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"entry": "schwarzschild", "M": 3.0, "samples": 2}"#).unwrap();
    let v = json(&run(&["check", "--config", cfg.to_str().unwrap()]).stdout);
    assert_eq!(v["params"]["M"], 3.0);
    let v = json(&run(&["check", "--config", cfg.to_str().unwrap(), "--M", "2"]).stdout);
    assert_eq!(v["params"]["M"], 2.0);
}

#[test]
fn output_is_deterministic() {
    let args = ["estimate", "schwarzschild", "--center-r", "6", "--a", "1", "--rays", "8", "--per-ray", "4", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a.stdout);
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r["implied_constant"].as_f64().unwrap().is_finite()));
}

#[test]
fn circular_geodesic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("orbit.csv");
    let o = run(&["geodesic", "schwarzschild", "--circular-r", "6", "--smax", "100", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&o.stdout);
    assert_eq!(summary["pass"], true);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let c_col = header.iter().position(|h| *h == "c_drift").unwrap();
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| r[c_col] < 1e-8 && (r[2] - 6.0).abs() < 1e-6));
}

#[test]
fn geodesic_without_out_streams_csv() {
    let o = run(&["geodesic", "minkowski-static", "--x0", "0,0,0", "--tangent", "1.2,0.3,0,0", "--smax", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("s,t,x1,x2,x3,T0,T1,T2,T3,c_drift,gTT_drift"));
    assert_eq!(json(&o.stderr)["command"], "geodesic");
}

#[test]
fn estimate_two_scale_on_schwarzschild() {
    let o = run(&["estimate", "schwarzschild", "--center-r", "6", "--a", "2", "--monitor", "curvature", "--two-scale", "--rays", "8", "--per-ray", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o.stdout);
    assert!(v["two_scale"]["ratio"].as_f64().unwrap() > 1.0);
}
