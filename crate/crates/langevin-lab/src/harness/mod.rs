//! Experiment orchestration: config resolution, replica-parallel execution,
//! and result serialization (`records.csv`, `summary.json`,
//! `resolved_config.json`).

mod bounds;
mod config;
mod ergodicity;
mod escape;
mod hitting;

pub use bounds::{
    randomized_matrix_bounds, run_check_bounds, run_estimate_constants, RandomizedBoundsSummary,
};
pub use config::{
    ContractParams, DynamicsSpec, ErgodicInputsSpec, ErgodicitySpec, EscapeSpec, ExperimentConfig,
    ExperimentSpec, HittingSpec, InitialPoint, RegionParams, SweepSpec, TheoremParams,
    BUDGET_CAP,
};
pub use ergodicity::{run_ergodicity_experiment, ErgodicityReport, ErgodicitySummary};
pub use escape::{run_escape_experiment, EscapeReport, EscapeSummary};
pub use hitting::{run_hitting_experiment, HittingReport, SweepPointSummary};

use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use crate::error::Result;

/// Fraction of diverged replicas above which a run exits with code 3.
pub const DIVERGENCE_EXIT_THRESHOLD: f64 = 0.1;

/// Outcome of a full experiment run: the serialized artifacts plus the
/// process exit code mandated for the CLI (0 success, 3 when more than 10%
/// of replicas diverged).
pub struct ExperimentOutput {
    pub resolved_config: serde_json::Value,
    pub records_csv: String,
    pub summary: serde_json::Value,
    /// Additional artifacts (name, contents), e.g. exported trajectories.
    pub extra_files: Vec<(String, String)>,
    pub exit_code: i32,
}

/// Runs the configured experiment to completion in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut resolved = serde_json::to_value(cfg)?;
    let mut exit_code = 0;
    let mut extra_files = Vec::new();
    let (records_csv, summary) = match &cfg.experiment {
        ExperimentSpec::HittingFosp(spec) | ExperimentSpec::HittingSosp(spec) => {
            let second_order = matches!(cfg.experiment, ExperimentSpec::HittingSosp(_));
            let report =
                hitting::run_hitting_experiment(spec, second_order, cfg.replicas, cfg.master_seed)?;
            if report.diverged_fraction() > DIVERGENCE_EXIT_THRESHOLD {
                exit_code = 3;
            }
            resolved["resolved_points"] = serde_json::to_value(&report.points)?;
            let mut csv = String::from("sweep_value,replica,tau,budget,diverged\n");
            for row in report.csv_records() {
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    row.sweep_value, row.replica, row.tau, row.budget, row.diverged
                )
                .expect("string write");
            }
            let summary = json!({
                "experiment": cfg.experiment.name(),
                "points": report.points,
                "log_log_slope": report.log_log_slope,
                "median_spread": report.median_spread,
                "diverged_fraction": report.diverged_fraction(),
            });
            if spec.trajectory_replicas > 0 {
                let traj = hitting::trajectories_csv(
                    spec,
                    second_order,
                    spec.trajectory_replicas.min(cfg.replicas),
                    cfg.master_seed,
                )?;
                extra_files.push(("trajectories.csv".to_string(), traj));
            }
            (csv, summary)
        }
        ExperimentSpec::Escape(spec) => {
            let report = escape::run_escape_experiment(spec, cfg.replicas, cfg.master_seed)?;
            resolved["resolved_summary"] = serde_json::to_value(&report.summary)?;
            let mut csv =
                String::from("replica,final_loss,displacement,contract_final_loss\n");
            for r in &report.records {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    r.replica,
                    r.final_loss,
                    r.displacement,
                    r.contract_final_loss
                        .map(|v| v.to_string())
                        .unwrap_or_default()
                )
                .expect("string write");
            }
            (csv, json!({"experiment": "escape", "summary": report.summary}))
        }
        ExperimentSpec::Ergodicity(spec) => {
            let report =
                ergodicity::run_ergodicity_experiment(spec, cfg.replicas, cfg.master_seed)?;
            let mut csv =
                String::from("replica,sgld_first_hit,pgd_first_hit,pgd_first_hit_late\n");
            let enc = |v: Option<u64>| v.map(|x| x as i64).unwrap_or(-1);
            for r in &report.records {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    r.replica,
                    enc(r.sgld_first_hit),
                    enc(r.pgd_first_hit),
                    enc(r.pgd_first_hit_late)
                )
                .expect("string write");
            }
            (
                csv,
                json!({"experiment": "ergodicity", "summary": report.summary}),
            )
        }
        ExperimentSpec::CheckBounds(spec) => {
            let report = bounds::run_check_bounds(spec, cfg.master_seed)?;
            (String::from("key,value\n"), report)
        }
        ExperimentSpec::EstimateConstants(spec) => {
            let report = bounds::run_estimate_constants(spec, cfg.master_seed)?;
            (String::from("key,value\n"), report)
        }
    };
    Ok(ExperimentOutput {
        resolved_config: resolved,
        records_csv,
        summary,
        extra_files,
        exit_code,
    })
}

/// Writes `records.csv`, `summary.json`, and `resolved_config.json` under
/// `out_dir`, creating it if needed.
pub fn write_outputs(output: &ExperimentOutput, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("records.csv"), &output.records_csv)?;
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&output.summary)?,
    )?;
    std::fs::write(
        out_dir.join("resolved_config.json"),
        serde_json::to_string_pretty(&output.resolved_config)?,
    )?;
    for (name, contents) in &output.extra_files {
        std::fs::write(out_dir.join(name), contents)?;
    }
    Ok(())
}
