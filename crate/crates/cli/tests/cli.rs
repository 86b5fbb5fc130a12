use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spin7flow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spin7flow")).args(args).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn squared_bundle_run_reports_a_smooth_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = spin7flow(&["--scenario", "n11-spin7", "--t-end", "0.1", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["status"], "ok");
    assert_eq!(report["smoothness"]["ok"], true);
    assert_eq!(report["smoothness"]["c"].as_f64().unwrap().abs(), 1.0);
    assert_eq!(report["class_first"], "SU(3)");
    for key in ["max_cocalibration", "max_torsion", "max_normalization", "s_norm_drift", "signatures"] {
        assert!(!report["monitors"][key].is_null(), "{key}");
    }
    assert!(report["monitors"]["max_torsion"].as_f64().unwrap() < 1e-2);
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,f,w_e12,"), "{header}");
    assert!(header.ends_with(",cocalibration,torsion,normalization,s_norm,sig_pos,sig_neg"));
    assert!(out.join("index.json").exists());
}

#[test]
fn unsquared_bundle_exits_with_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = spin7flow(&["--scenario", "n11-spin7", "--set", "squared=false", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["status"], "precondition-failed");
    assert!((report["smoothness"]["c"].as_f64().unwrap() + 2.0).abs() < 1e-12);
    assert!(!out.join("trajectory.csv").exists());
}

#[test]
fn flat_abelian_trajectory_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = spin7flow(&["--scenario", "flat-abelian", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let coeffs = |row: &str| row.split(',').skip(1).take(35).map(str::to_owned).collect::<Vec<_>>();
    assert!(rows.len() > 2);
    assert!(rows.iter().all(|r| coeffs(r) == coeffs(rows[0])));
    for name in ["cocalibration", "torsion"] {
        assert!(column(&csv, name).iter().all(|&x| x == 0.0), "{name}");
    }
}

#[test]
fn identical_configs_give_identical_fixed_step_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"scenario": "n11-spin7", "params": {"a": 1.0, "b": 2.0, "c_param": 0.5},
            "flow": {"t_end": 0.05, "integrator": "rk4", "step": 1e-3}}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = spin7flow(&["--config", config.to_str().unwrap(), "--output", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn theta_sweep_shares_the_f_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = spin7flow(&[
        "--scenario",
        "n11-spin7",
        "--set",
        "theta=[0, 0.3, 1.0]",
        "--t-end",
        "0.2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let index = read_json(&out.join("index.json"));
    assert_eq!(index.as_array().unwrap().len(), 3);
    let series: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            let csv = std::fs::read_to_string(out.join(format!("point-{i:03}")).join("trajectory.csv")).unwrap();
            column(&csv, "f")
        })
        .collect();
    for other in &series[1..] {
        assert_eq!(other.len(), series[0].len());
        let gap = other.iter().zip(&series[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-6, "{gap}");
    }
}

#[test]
fn config_errors_carry_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, "{\n  \"scenario\": \"n11-spin7\",\n  \"params\": {\"a\": 1.0,}\n}").unwrap();
    let o = spin7flow(&["--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");

    std::fs::write(&config, r#"{"scenario": "n11-spin7", "flow": {"tend": 1.0}}"#).unwrap();
    let o = spin7flow(&["--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tend"));
}

#[test]
fn verify_lists_every_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = spin7flow(&["--verify", "--output", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS metric: SU(3) model is Euclidean"));
    let report = read_json(&dir.path().join("identities.json"));
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), stdout.lines().count() - 1);
}
