//! Hitting-time experiments: replicated first-entry measurement with
//! optional theorem-prescribed hyper-parameters and epsilon/dimension
//! sweeps for the scaling checks.

use serde::Serialize;

use super::config::{HittingSpec, SweepSpec, BUDGET_CAP};
use crate::dynamics::DynamicsConfig;
use crate::error::{Error, Result};
use crate::problems::{Problem, ProblemConfig};
use crate::schedule::StepSchedule;
use crate::stationarity::{
    exceedance, measure_hitting, median_tau, tau_quantile, HittingRecord, RegionSpec,
};
use crate::theory::{fosp_bound, sosp_bound, FospBoundInputs, SospBoundInputs};

#[derive(Debug, Clone, Serialize)]
pub struct HittingCsvRecord {
    pub sweep_value: f64,
    pub replica: u64,
    /// -1 encodes a censored replica in the CSV export.
    pub tau: i64,
    pub budget: u64,
    pub diverged: bool,
}

/// Resolved hyper-parameters actually used for one sweep point; echoes the
/// theorem caps when `use_theorem_params` filled them.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedParams {
    pub epsilon: f64,
    pub delta0: f64,
    pub eta0: f64,
    pub alpha: f64,
    pub budget: u64,
    pub theorem_n: Option<f64>,
    /// Set when the theorem-prescribed budget exceeded the cap; the bound
    /// is then not testable at desk scale and the run used the cap.
    pub budget_capped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPointSummary {
    pub sweep_value: f64,
    pub params: ResolvedParams,
    pub replicas: u64,
    pub hit_fraction: f64,
    pub diverged_fraction: f64,
    pub median_tau: Option<u64>,
    pub q10_tau: Option<u64>,
    pub q90_tau: Option<u64>,
    /// Empirical `P(tau >= N)` at the theorem bound, when one was computed.
    pub exceedance_at_theorem_n: Option<f64>,
    pub exceedance_at_budget: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HittingReport {
    pub points: Vec<SweepPointSummary>,
    /// Log-log slope of median tau against the sweep value (epsilon sweeps
    /// with at least two uncensored medians).
    pub log_log_slope: Option<f64>,
    /// max(median)/min(median) across sweep points (dimension sweeps).
    pub median_spread: Option<f64>,
    #[serde(skip)]
    pub raw: Vec<(f64, Vec<HittingRecord>)>,
}

impl HittingReport {
    pub fn csv_records(&self) -> Vec<HittingCsvRecord> {
        let mut out = Vec::new();
        for (value, records) in &self.raw {
            for r in records {
                out.push(HittingCsvRecord {
                    sweep_value: *value,
                    replica: r.replica,
                    tau: r.tau.map(|t| t as i64).unwrap_or(-1),
                    budget: r.budget,
                    diverged: r.diverged,
                });
            }
        }
        out
    }

    pub fn diverged_fraction(&self) -> f64 {
        let total: usize = self.raw.iter().map(|(_, r)| r.len()).sum();
        let diverged: usize = self
            .raw
            .iter()
            .map(|(_, r)| r.iter().filter(|x| x.diverged).count())
            .sum();
        diverged as f64 / total.max(1) as f64
    }
}

pub fn run_hitting_experiment(
    spec: &HittingSpec,
    second_order: bool,
    replicas: u64,
    master_seed: u64,
) -> Result<HittingReport> {
    spec.validate()?;
    let mut points = Vec::new();
    let mut raw = Vec::new();

    match &spec.sweep {
        None => {
            let problem = spec.problem.build()?;
            let (summary, records) = run_point(
                spec,
                second_order,
                problem.as_ref(),
                spec.region.epsilon,
                spec.dynamics.eta0,
                replicas,
                master_seed,
                spec.region.epsilon,
            )?;
            points.push(summary);
            raw.push((spec.region.epsilon, records));
        }
        Some(SweepSpec::Epsilon { values, eta0_coeff }) => {
            let problem = spec.problem.build()?;
            for &eps in values {
                let eta0 = eta0_coeff * eps * eps;
                let (summary, records) = run_point(
                    spec,
                    second_order,
                    problem.as_ref(),
                    eps,
                    eta0,
                    replicas,
                    master_seed,
                    eps,
                )?;
                points.push(summary);
                raw.push((eps, records));
            }
        }
        Some(SweepSpec::Dimension { values }) => {
            for &dim in values {
                let cfg = with_dimension(&spec.problem, dim)?;
                let problem = cfg.build()?;
                let (summary, records) = run_point(
                    spec,
                    second_order,
                    problem.as_ref(),
                    spec.region.epsilon,
                    spec.dynamics.eta0,
                    replicas,
                    master_seed,
                    dim as f64,
                )?;
                points.push(summary);
                raw.push((dim as f64, records));
            }
        }
    }

    let log_log_slope = match &spec.sweep {
        Some(SweepSpec::Epsilon { .. }) => log_log_slope(&points),
        _ => None,
    };
    let median_spread = match &spec.sweep {
        Some(SweepSpec::Dimension { .. }) => {
            let medians: Vec<f64> = points
                .iter()
                .filter_map(|p| p.median_tau)
                .map(|m| m.max(1) as f64)
                .collect();
            if medians.len() == points.len() && !medians.is_empty() {
                let max = medians.iter().cloned().fold(f64::MIN, f64::max);
                let min = medians.iter().cloned().fold(f64::MAX, f64::min);
                Some(max / min)
            } else {
                None
            }
        }
        _ => None,
    };

    Ok(HittingReport {
        points,
        log_log_slope,
        median_spread,
        raw,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_point(
    spec: &HittingSpec,
    second_order: bool,
    problem: &dyn Problem,
    epsilon: f64,
    eta0: f64,
    replicas: u64,
    master_seed: u64,
    sweep_value: f64,
) -> Result<(SweepPointSummary, Vec<HittingRecord>)> {
    let x0 = spec.x0.build(problem, master_seed)?;
    let region = if second_order {
        RegionSpec::sosp(epsilon, spec.region.lambda_eps.ok_or_else(|| {
            Error::config("region.lambda_eps", "required for hitting_sosp")
        })?)?
    } else {
        RegionSpec::fosp(epsilon)?
    };

    let mut delta0 = spec.dynamics.delta0;
    let mut eta0 = eta0;
    let mut budget = spec.dynamics.max_iters;
    let mut theorem_n = None;
    let mut budget_capped = false;
    if let Some(tp) = &spec.use_theorem_params {
        let f0 = match tp.f0 {
            Some(v) => v,
            None => problem.loss(&x0)?,
        };
        let (d0, e0, n_bound) = if second_order {
            let missing = |name: &str| Error::config(
                "use_theorem_params",
                format!("{name} is required for the second-order prescription"),
            );
            let inputs = SospBoundInputs {
                c0: tp.c0.ok_or_else(|| missing("c0"))?,
                c3: tp.c3.ok_or_else(|| missing("c3"))?,
                d4: tp.d4.ok_or_else(|| missing("d4"))?,
                b2: tp.b2.ok_or_else(|| missing("b2"))?,
                lambda_eps: spec
                    .region
                    .lambda_eps
                    .ok_or_else(|| missing("region.lambda_eps"))?,
                q: tp.q,
                eps: epsilon,
                rho: tp.rho,
                dim: problem.dim(),
                eta0: 1.0, // replaced by the cap below
                alpha: spec.dynamics.alpha,
                c_alpha: tp.c_alpha,
            };
            let caps = sosp_bound(&inputs)?;
            let bound = sosp_bound(&SospBoundInputs {
                eta0: caps.eta0_max,
                ..inputs
            })?;
            (bound.delta0, caps.eta0_max, bound.n_bound)
        } else {
            let inputs = FospBoundInputs {
                f0,
                c2: tp.c2,
                b1: tp.b1,
                eta0: 1.0, // replaced by the cap below
                alpha: spec.dynamics.alpha,
                eps: epsilon,
                rho: tp.rho,
                dim: problem.dim(),
                c_alpha: tp.c_alpha,
            };
            let caps = fosp_bound(&inputs)?;
            let bound = fosp_bound(&FospBoundInputs {
                eta0: caps.eta0_max,
                ..inputs
            })?;
            (caps.delta0_max, caps.eta0_max, bound.n_bound)
        };
        delta0 = d0;
        eta0 = e0;
        theorem_n = Some(n_bound);
        if n_bound >= BUDGET_CAP as f64 {
            budget_capped = true;
            budget = BUDGET_CAP;
        } else {
            budget = n_bound.ceil() as u64;
        }
    }

    let cfg = DynamicsConfig {
        method: spec.dynamics.method,
        delta0,
        schedule: StepSchedule::new(eta0, spec.dynamics.alpha)?,
        max_iters: budget.min(BUDGET_CAP),
        seed: master_seed,
    };
    let check_every = spec
        .check_every
        .unwrap_or(if problem.dim() <= 64 { 1 } else { 10 });
    let records = measure_hitting(problem, &cfg, &region, &x0, replicas, check_every)?;

    let hit = records.iter().filter(|r| r.tau.is_some()).count() as f64 / replicas as f64;
    let diverged = records.iter().filter(|r| r.diverged).count() as f64 / replicas as f64;
    let summary = SweepPointSummary {
        sweep_value,
        params: ResolvedParams {
            epsilon,
            delta0,
            eta0,
            alpha: spec.dynamics.alpha,
            budget: cfg.max_iters,
            theorem_n,
            budget_capped,
        },
        replicas,
        hit_fraction: hit,
        diverged_fraction: diverged,
        median_tau: median_tau(&records),
        q10_tau: tau_quantile(&records, 0.1),
        q90_tau: tau_quantile(&records, 0.9),
        exceedance_at_theorem_n: theorem_n.map(|n| {
            let n = n.min(cfg.max_iters as f64) as u64;
            exceedance(&records, n)
        }),
        exceedance_at_budget: exceedance(&records, cfg.max_iters),
    };
    Ok((summary, records))
}

/// Least-squares slope of `log(median tau)` against `log(sweep value)`,
/// reported as the positive exponent `s` in `tau ~ value^(-s)`.
fn log_log_slope(points: &[SweepPointSummary]) -> Option<f64> {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| {
            p.median_tau
                .map(|m| (p.sweep_value.ln(), (m.max(1) as f64).ln()))
        })
        .collect();
    if data.len() < 2 {
        return None;
    }
    let n = data.len() as f64;
    let mean_x = data.iter().map(|d| d.0).sum::<f64>() / n;
    let mean_y = data.iter().map(|d| d.1).sum::<f64>() / n;
    let sxy: f64 = data
        .iter()
        .map(|d| (d.0 - mean_x) * (d.1 - mean_y))
        .sum();
    let sxx: f64 = data.iter().map(|d| (d.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-(sxy / sxx))
}

/// Rebuilds a linear-regression config at another dimension, holding the
/// spectrum family fixed.
fn with_dimension(cfg: &ProblemConfig, dim: usize) -> Result<ProblemConfig> {
    match cfg {
        ProblemConfig::LinearRegression {
            spectrum,
            x_star,
            rotate_seed,
            ..
        } => Ok(ProblemConfig::LinearRegression {
            dim,
            spectrum: spectrum.clone(),
            x_star: x_star.clone(),
            rotate_seed: *rotate_seed,
        }),
        _ => Err(Error::config(
            "sweep",
            "dimension sweeps are defined for linear_regression",
        )),
    }
}

/// Exports per-replica trajectories of the first `count` replicas as CSV
/// rows `replica,iteration,loss,grad_norm,min_hessian_eig`; the eigenvalue
/// column is filled for second-order regions and empty otherwise.
pub fn trajectories_csv(
    spec: &HittingSpec,
    second_order: bool,
    count: u64,
    master_seed: u64,
) -> Result<String> {
    let problem = spec.problem.build()?;
    let x0 = spec.x0.build(problem.as_ref(), master_seed)?;
    let cfg = DynamicsConfig {
        method: spec.dynamics.method,
        delta0: spec.dynamics.delta0,
        schedule: StepSchedule::new(spec.dynamics.eta0, spec.dynamics.alpha)?,
        max_iters: spec.dynamics.max_iters.min(BUDGET_CAP),
        seed: master_seed,
    };
    let mut out = String::from("replica,iteration,loss,grad_norm,min_hessian_eig\n");
    for replica in 0..count {
        let traj = crate::dynamics::run(problem.as_ref(), &cfg, &x0, replica, None, |_, _| false)?;
        for (idx, x) in &traj.iterates {
            let sample = traj
                .samples
                .iter()
                .find(|s| s.iteration == *idx)
                .expect("sample recorded for every stored iterate");
            let eig = if second_order {
                let h = problem.hessian(x)?;
                format!("{}", crate::stationarity::min_eig(&h)?)
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{replica},{idx},{},{},{eig}\n",
                sample.loss, sample.grad_norm
            ));
        }
    }
    Ok(out)
}
