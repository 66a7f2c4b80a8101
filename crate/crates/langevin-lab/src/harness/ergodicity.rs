//! Ergodicity contrast: SGLD and PGD driven by the identical Gaussian
//! sequence race to enter an epsilon-ball around an off-center target.
//! With decreasing steps the SGLD noise floor survives (scalar case:
//! stationary variance 1/2 at unit volatility) while the PGD variance
//! collapses to a point mass, so late PGD hits of a distant ball die out.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ErgodicitySpec;
use crate::dynamics::Method;
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::rng::replica_streams;
use crate::schedule::StepSchedule;
use crate::theory::variance_recursion_checkpoints;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityRecord {
    pub replica: u64,
    pub sgld_first_hit: Option<u64>,
    pub pgd_first_hit: Option<u64>,
    /// First PGD hit at an iteration past the configured late mark.
    pub pgd_first_hit_late: Option<u64>,
    /// First-coordinate values at the variance checkpoints.
    pub sgld_checkpoints: Vec<f64>,
    pub pgd_checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceCheckpoint {
    pub iteration: u64,
    pub sgld_empirical: f64,
    pub pgd_empirical: f64,
    /// Exact recursion values scaled by `delta0^2`; present for the scalar
    /// quadratic problem where the iterates are Gaussian with exactly this
    /// variance.
    pub sgld_predicted: Option<f64>,
    pub pgd_predicted: Option<f64>,
    /// Sampling standard error of the empirical variances.
    pub sgld_std_error: f64,
    pub pgd_std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicitySummary {
    pub replicas: u64,
    pub budget: u64,
    pub sgld_hit_fraction: f64,
    pub pgd_hit_fraction: f64,
    pub late_mark: u64,
    pub pgd_late_hit_fraction: f64,
    pub variance: Vec<VarianceCheckpoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    pub summary: ErgodicitySummary,
    pub records: Vec<ErgodicityRecord>,
}

pub fn run_ergodicity_experiment(
    spec: &ErgodicitySpec,
    replicas: u64,
    master_seed: u64,
) -> Result<ErgodicityReport> {
    spec.validate()?;
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be >= 1".into()));
    }
    let problem = spec.problem.build()?;
    let dim = problem.dim();
    if spec.z0.len() != dim {
        return Err(Error::config(
            "z0",
            format!("expected {dim} entries, got {}", spec.z0.len()),
        ));
    }
    let schedule = StepSchedule::new(spec.eta0, spec.alpha)?;
    let z0 = DVector::from_row_slice(&spec.z0);

    let records: Vec<ErgodicityRecord> = (0..replicas)
        .into_par_iter()
        .map(|replica| -> Result<ErgodicityRecord> {
            run_replica(problem.as_ref(), spec, &schedule, &z0, master_seed, replica)
        })
        .collect::<Result<Vec<_>>>()?;

    let hit = |f: &dyn Fn(&ErgodicityRecord) -> Option<u64>| {
        records.iter().filter(|r| f(r).is_some()).count() as f64 / replicas as f64
    };
    let sgld_hit_fraction = hit(&|r| r.sgld_first_hit);
    let pgd_hit_fraction = hit(&|r| r.pgd_first_hit);
    let pgd_late_hit_fraction = hit(&|r| r.pgd_first_hit_late);

    // Empirical variance across replicas at each checkpoint, against the
    // exact recursion for the scalar problem.
    let is_scalar = matches!(
        spec.problem,
        crate::problems::ProblemConfig::ScalarQuadratic
    );
    let predicted_sgld = if is_scalar {
        Some(variance_recursion_checkpoints(
            Method::Sgld,
            &schedule,
            &spec.variance_checkpoints,
        )?)
    } else {
        None
    };
    let predicted_pgd = if is_scalar {
        Some(variance_recursion_checkpoints(
            Method::Pgd,
            &schedule,
            &spec.variance_checkpoints,
        )?)
    } else {
        None
    };
    let delta0_sq = spec.delta0 * spec.delta0;
    let variance = spec
        .variance_checkpoints
        .iter()
        .enumerate()
        .map(|(k, &iteration)| {
            let var_of = |extract: &dyn Fn(&ErgodicityRecord) -> f64| {
                let n = replicas as f64;
                let mean = records.iter().map(extract).sum::<f64>() / n;
                records
                    .iter()
                    .map(|r| (extract(r) - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0).max(1.0)
            };
            let sgld_empirical = var_of(&|r| r.sgld_checkpoints[k]);
            let pgd_empirical = var_of(&|r| r.pgd_checkpoints[k]);
            let se = (2.0 / (replicas as f64 - 1.0).max(1.0)).sqrt();
            VarianceCheckpoint {
                iteration,
                sgld_empirical,
                pgd_empirical,
                sgld_predicted: predicted_sgld.as_ref().map(|v| delta0_sq * v[k]),
                pgd_predicted: predicted_pgd.as_ref().map(|v| delta0_sq * v[k]),
                sgld_std_error: sgld_empirical * se,
                pgd_std_error: pgd_empirical * se,
            }
        })
        .collect();

    Ok(ErgodicityReport {
        summary: ErgodicitySummary {
            replicas,
            budget: spec.budget,
            sgld_hit_fraction,
            pgd_hit_fraction,
            late_mark: spec.late_mark,
            pgd_late_hit_fraction,
            variance,
        },
        records,
    })
}

/// One replica: both methods advance in a single loop sharing each step's
/// `zeta` draw, so their noise sequences agree by construction. The
/// stochastic-gradient stream only feeds the SGLD iterate (PGD uses the
/// population gradient).
fn run_replica(
    problem: &dyn Problem,
    spec: &ErgodicitySpec,
    schedule: &StepSchedule,
    z0: &DVector<f64>,
    master_seed: u64,
    replica: u64,
) -> Result<ErgodicityRecord> {
    let dim = problem.dim();
    let mut streams = replica_streams(master_seed, replica);
    let mut x = DVector::<f64>::zeros(dim); // SGLD
    let mut y = DVector::<f64>::zeros(dim); // PGD
    let mut grad_x = DVector::<f64>::zeros(dim);
    let mut grad_y = DVector::<f64>::zeros(dim);
    let mut zeta = DVector::<f64>::zeros(dim);

    let mut sgld_first_hit = None;
    let mut pgd_first_hit = None;
    let mut pgd_first_hit_late = None;
    let mut sgld_checkpoints = Vec::with_capacity(spec.variance_checkpoints.len());
    let mut pgd_checkpoints = Vec::with_capacity(spec.variance_checkpoints.len());
    let mut next_checkpoint = 0usize;

    let eps = spec.eps;
    let in_ball = |v: &DVector<f64>| (v - z0).norm() <= eps;
    if in_ball(&x) {
        sgld_first_hit = Some(0);
    }
    if in_ball(&y) {
        pgd_first_hit = Some(0);
    }
    record_checkpoint(
        0,
        &spec.variance_checkpoints,
        &mut next_checkpoint,
        &x,
        &y,
        &mut sgld_checkpoints,
        &mut pgd_checkpoints,
    );

    for n in 1..=spec.budget {
        let eta = schedule.step_at(n);
        for z in zeta.iter_mut() {
            *z = StandardNormal.sample(&mut streams.noise);
        }
        problem.sample_grad_into(&x, &mut grad_x, &mut streams.grad)?;
        problem.grad_into(&y, &mut grad_y)?;
        let sgld_noise = spec.delta0 * eta.sqrt();
        let pgd_noise = spec.delta0 * eta;
        for i in 0..dim {
            x[i] += -eta * grad_x[i] + sgld_noise * zeta[i];
            y[i] += -eta * grad_y[i] + pgd_noise * zeta[i];
        }
        if !(x[0].is_finite() && y[0].is_finite()) {
            return Err(Error::NonFiniteIterate { index: n });
        }
        if sgld_first_hit.is_none() && in_ball(&x) {
            sgld_first_hit = Some(n);
        }
        if in_ball(&y) {
            if pgd_first_hit.is_none() {
                pgd_first_hit = Some(n);
            }
            if pgd_first_hit_late.is_none() && n > spec.late_mark {
                pgd_first_hit_late = Some(n);
            }
        }
        record_checkpoint(
            n,
            &spec.variance_checkpoints,
            &mut next_checkpoint,
            &x,
            &y,
            &mut sgld_checkpoints,
            &mut pgd_checkpoints,
        );
    }
    // Pad unreached checkpoints (budget shorter than requested marks).
    while sgld_checkpoints.len() < spec.variance_checkpoints.len() {
        sgld_checkpoints.push(x[0]);
        pgd_checkpoints.push(y[0]);
    }
    Ok(ErgodicityRecord {
        replica,
        sgld_first_hit,
        pgd_first_hit,
        pgd_first_hit_late,
        sgld_checkpoints,
        pgd_checkpoints,
    })
}

#[allow(clippy::too_many_arguments)]
fn record_checkpoint(
    n: u64,
    checkpoints: &[u64],
    next: &mut usize,
    x: &DVector<f64>,
    y: &DVector<f64>,
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
) {
    while *next < checkpoints.len() && checkpoints[*next] == n {
        xs.push(x[0]);
        ys.push(y[0]);
        *next += 1;
    }
}
