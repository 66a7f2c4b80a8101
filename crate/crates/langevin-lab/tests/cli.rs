//! End-to-end CLI checks: output files, exit codes, reproducibility, and
//! summary/record consistency.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_langevin-lab")
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("langevin-lab-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const ESCAPE_CONFIG: &str = r#"{
  "experiment": {
    "kind": "escape",
    "eigenvalues": [-0.5, 0.5],
    "delta0": 0.1,
    "eta0": 0.001,
    "alpha": 0.0
  },
  "replicas": 50,
  "master_seed": 7
}"#;

#[test]
fn escape_run_writes_outputs_and_is_reproducible() {
    let dir = scratch_dir("escape");
    let cfg = write_config(&dir, "escape.json", ESCAPE_CONFIG);
    let run = |out: &str| {
        let status = Command::new(bin())
            .args([
                "run-escape",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                &dir.join(out).to_string_lossy(),
                "--threads",
                "2",
            ])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    };
    run("a");
    run("b");
    for name in ["records.csv", "summary.json", "resolved_config.json"] {
        let a = std::fs::read(dir.join("a").join(name)).unwrap();
        let b = std::fs::read(dir.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical-seed runs");
        assert!(!a.is_empty());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("a/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["experiment"], "escape");
    assert!(summary["summary"]["mean_loss"].is_number());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn hitting_summary_recomputes_from_records() {
    let dir = scratch_dir("hitting");
    let cfg = write_config(
        &dir,
        "hit.json",
        r#"{
  "experiment": {
    "kind": "hitting_fosp",
    "problem": {"kind": "linear_regression", "dim": 2, "spectrum": {"kind": "flat"}},
    "dynamics": {"method": "sgld", "delta0": 0.2, "eta0": 0.05, "alpha": 0.0, "max_iters": 20000},
    "region": {"epsilon": 0.2},
    "x0": {"kind": "offset_e1", "distance": 1.0},
    "trajectory_replicas": 2
  },
  "replicas": 40,
  "master_seed": 99
}"#,
    );
    let out = dir.join("out");
    let status = Command::new(bin())
        .args([
            "run-hitting",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // Recompute the summary statistics from the per-replica CSV rows.
    let csv = std::fs::read_to_string(out.join("records.csv")).unwrap();
    let mut taus = Vec::new();
    let mut hits = 0usize;
    let mut total = 0usize;
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let tau: i64 = fields[2].parse().unwrap();
        let budget: u64 = fields[3].parse().unwrap();
        total += 1;
        if tau >= 0 {
            hits += 1;
            taus.push(tau as u64);
        } else {
            taus.push(budget + 1);
        }
    }
    taus.sort_unstable();
    let median = taus[(taus.len() - 1) / 2];
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let point = &summary["points"][0];
    assert_eq!(total, 40);
    assert_eq!(
        point["hit_fraction"].as_f64().unwrap(),
        hits as f64 / total as f64
    );
    assert_eq!(point["median_tau"].as_u64().unwrap(), median);
    // trajectory export for the first replicas
    let traj = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(traj.starts_with("replica,iteration,loss,grad_norm,min_hessian_eig\n"));
    assert!(traj.lines().count() > 2);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_errors_exit_2() {
    let dir = scratch_dir("badcfg");
    // malformed JSON
    let cfg = write_config(&dir, "bad.json", "{ not json");
    let status = Command::new(bin())
        .args(["run-escape", "--config", cfg.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // schema violation: unknown field
    let cfg = write_config(
        &dir,
        "unknown_field.json",
        r#"{"experiment": {"kind": "escape", "eigenvalues": [-1.0], "delta0": 0.1, "eta0": 0.01, "bogus": 1}, "replicas": 2}"#,
    );
    let status = Command::new(bin())
        .args(["run-escape", "--config", cfg.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // semantic violation: no negative eigenvalue
    let cfg = write_config(
        &dir,
        "no_saddle.json",
        r#"{"experiment": {"kind": "escape", "eigenvalues": [1.0], "delta0": 0.1, "eta0": 0.01}, "replicas": 2}"#,
    );
    let status = Command::new(bin())
        .args(["run-escape", "--config", cfg.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // subcommand / config mismatch
    let cfg = write_config(&dir, "escape.json", ESCAPE_CONFIG);
    let status = Command::new(bin())
        .args(["run-ergodicity", "--config", cfg.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn widespread_divergence_exits_3() {
    let dir = scratch_dir("diverge");
    // Gradient flow up the unstable direction of a saddle diverges in every
    // replica; the run completes (censored records) but must exit 3.
    let cfg = write_config(
        &dir,
        "diverge.json",
        r#"{
  "experiment": {
    "kind": "hitting_fosp",
    "problem": {"kind": "quadratic_saddle", "eigenvalues": [-4.0]},
    "dynamics": {"method": "sgd", "delta0": 0.0, "eta0": 0.4, "alpha": 0.0, "max_iters": 100000},
    "region": {"epsilon": 1e-9},
    "x0": {"kind": "explicit", "values": [1.0]}
  },
  "replicas": 10,
  "master_seed": 1
}"#,
    );
    let status = Command::new(bin())
        .args([
            "run-hitting",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn check_bounds_and_estimate_constants_run() {
    let dir = scratch_dir("bounds");
    let cfg = write_config(
        &dir,
        "bounds.json",
        r#"{
  "experiment": {
    "kind": "check_bounds",
    "matrix_bounds": {"eigenvalues": [-1.0, 2.0], "eta0": 0.1, "alpha": 0.0, "o": 0, "n": 5, "randomized_instances": 50},
    "escape_window": {"lambda_h": 1.0, "d4": 1.0},
    "ou_expected_loss": {"eigenvalues": [-0.5, 0.5], "delta0": 0.1, "t": 0.6931471805599453},
    "fosp": {"f0": 1.0, "c2": 1.0, "b1": 1.0, "eta0": 4.1666666666666665e-5, "alpha": 0.0, "eps": 0.1, "rho": 0.1, "dim": 1, "c_alpha": 1.0}
  },
  "replicas": 1,
  "master_seed": 5
}"#,
    );
    let out = dir.join("out");
    let status = Command::new(bin())
        .args([
            "check-bounds",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["matrix_bounds_randomized"]["all_pass"].as_bool().unwrap());
    // 2 ln 56
    let d5 = summary["escape_window"]["d5"].as_f64().unwrap();
    assert!((d5 - 8.0507033814703).abs() < 1e-9);
    // constant-step bound: N = 8 F0 / (eps^2 rho eta0) = 1.92e8
    let n = summary["fosp"]["bound"]["n_bound"].as_f64().unwrap();
    assert!((n - 1.92e8).abs() / 1.92e8 < 1e-9);

    let cfg = write_config(
        &dir,
        "constants.json",
        r#"{
  "experiment": {
    "kind": "estimate_constants",
    "problem": {"kind": "linear_regression", "dim": 3, "spectrum": {"kind": "flat"}},
    "gamma": 2.0,
    "samples": 10000,
    "points": 10
  },
  "replicas": 1,
  "master_seed": 5
}"#,
    );
    let out = dir.join("out2");
    let status = Command::new(bin())
        .args([
            "estimate-constants",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["all_dominated"].as_bool().unwrap());
    let _ = std::fs::remove_dir_all(&dir);
}
