use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_shellvar"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn evaluate_lambda_only_plate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"grid": {"nx": 9, "ny": 9}, "reference_surface": "plate", "epsilon": 0.1,
                  "energy": {"helfrich": {"k_c": 1, "lambda": 1}}}"#;
    let o = run(dir.path(), "evaluate", cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!((v["total_energy"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["schema_version"], 1);
    assert!(dir.path().join("out/evaluate.json").exists());
    assert!(dir.path().join("out/density.csv").exists());
}

#[test]
fn verify_helfrich_fails_on_blowup_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"grid": {"nx": 5, "ny": 5}, "epsilon": 0.1,
                  "energy": {"helfrich": {"k_c": 1, "c0": 1, "k_bar": 0.5, "lambda": 1}},
                  "verify": {"polyconvexity": 2000, "coercivity": 100, "blowup": 20}}"#;
    let o = run(dir.path(), "verify", cfg, &["--seed", "7"]);
    assert_eq!(o.status.code(), Some(1));
    let v = stdout_json(&o);
    assert_eq!(v["polyconvexity"]["passed"], true);
    assert_eq!(v["blowup"]["passed"], false);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["classification"], "polyconvex but not orientation-preserving");
    assert!(v["coercivity_skipped"].is_string());
}

#[test]
fn curvature_torus_total_curvature_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"grid": {"nx": 48, "ny": 48}, "reference_surface": {"kind": "torus", "R": 2, "r": 0.5},
                  "epsilon": 0.1, "energy": {"helfrich": {}}}"#;
    let o = run(dir.path(), "curvature", cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/curvature.csv")).unwrap();
    let header: Vec<String> = text.lines().next().unwrap().split(',').map(String::from).collect();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (w, s, k) = (col("weight"), col("sqrt_a"), col("K"));
    let total: f64 = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            f[w] * f[s] * f[k]
        })
        .sum();
    assert!(total.abs() < 1e-8, "{total}");
}

#[test]
fn minimize_clamped_plate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"grid": {"nx": 9, "ny": 9}, "epsilon": 0.1,
                  "energy": {"poly_family": {"terms": [{"a": 1, "b": 1, "gamma": 4, "u": 0.2}],
                                             "gamma": [{"type": "affine", "a": -8}]}},
                  "loads": {"f": [0, 0, -0.01]},
                  "bc": {"gamma0": {"edges": ["north", "south", "east", "west"]}}}"#;
    let o = run(dir.path(), "minimize", cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["converged"], true);
    for f in ["minimize.json", "minimize.obj", "minimize.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn invalid_exponent_exits_2_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"grid": {"nx": 5, "ny": 5}, "epsilon": 0.1,
                  "energy": {"poly_family": {"terms": [{"a": 1, "b": 1, "gamma": 1.5}]}}}"#;
    let o = run(dir.path(), "evaluate", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "validation");
    assert!(e["error"]["message"].as_str().unwrap().contains("γ_i ≥ 2"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "evaluate", "{\"grid\": ", &[]);
    assert_eq!(o.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "parse");
    assert!(e["error"]["line"].is_number());
}

#[test]
fn unknown_command_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "explode", "{}", &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"grid": {"nx": 5, "ny": 5}, "epsilon": 0.1,
                  "energy": {"poly_family": {"terms": [{"a": 1, "b": 1, "gamma": 2, "u": 0.1}],
                                             "gamma": [{"type": "log_barrier", "mu": 1}]}},
                  "verify": {"polyconvexity": 500, "coercivity": 500, "blowup": 12}}"#;
    let a = run(dir.path(), "verify", cfg, &["--seed", "3"]);
    let b = run(dir.path(), "verify", cfg, &["--seed", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
