//! Stationary-region membership tests and hitting-time measurement.
//!
//! Region tests use the population gradient and Hessian (the regions are
//! defined through `grad F` and `hess F`, which the suite problems expose
//! analytically), with inclusive boundaries: a first-order stationary point
//! has `|grad F(x)| <= eps`, a second-order one additionally has
//! `lambda_min(hess F(x)) >= -lambda_eps`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run, DynamicsConfig, StopReason};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Fosp,
    Sosp,
}

/// Stationary-region specification: gradient tolerance `epsilon`, plus the
/// Hessian tolerance `lambda_eps` for second-order regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub epsilon: f64,
    #[serde(default)]
    pub lambda_eps: Option<f64>,
}

impl RegionSpec {
    pub fn fosp(epsilon: f64) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(
                "epsilon must be nonnegative and finite".into(),
            ));
        }
        Ok(RegionSpec {
            kind: RegionKind::Fosp,
            epsilon,
            lambda_eps: None,
        })
    }

    pub fn sosp(epsilon: f64, lambda_eps: f64) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(
                "epsilon must be nonnegative and finite".into(),
            ));
        }
        if lambda_eps <= 0.0 || !lambda_eps.is_finite() {
            return Err(Error::InvalidParameter(
                "lambda_eps must be positive and finite for SOSP regions".into(),
            ));
        }
        Ok(RegionSpec {
            kind: RegionKind::Sosp,
            epsilon,
            lambda_eps: Some(lambda_eps),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RegionKind::Fosp => RegionSpec::fosp(self.epsilon).map(|_| ()),
            RegionKind::Sosp => {
                let le = self.lambda_eps.ok_or_else(|| {
                    Error::InvalidParameter("SOSP region requires lambda_eps".into())
                })?;
                RegionSpec::sosp(self.epsilon, le).map(|_| ())
            }
        }
    }

    /// Membership test dispatching on the region kind.
    pub fn contains(&self, problem: &dyn Problem, x: &DVector<f64>) -> Result<bool> {
        match self.kind {
            RegionKind::Fosp => is_fosp(problem, x, self.epsilon),
            RegionKind::Sosp => is_sosp(problem, x, self),
        }
    }
}

/// `|grad F(x)| <= eps`, boundary inclusive.
pub fn is_fosp(problem: &dyn Problem, x: &DVector<f64>, eps: f64) -> Result<bool> {
    Ok(problem.grad(x)?.norm() <= eps)
}

/// Smallest eigenvalue of a symmetric matrix; see [`linalg::min_eig`].
pub fn min_eig(h: &DMatrix<f64>) -> Result<f64> {
    linalg::min_eig(h)
}

/// `|grad F(x)| <= eps` and `lambda_min(hess F(x)) >= -lambda_eps`.
pub fn is_sosp(problem: &dyn Problem, x: &DVector<f64>, spec: &RegionSpec) -> Result<bool> {
    let lambda_eps = spec
        .lambda_eps
        .ok_or_else(|| Error::InvalidParameter("SOSP region requires lambda_eps".into()))?;
    if !is_fosp(problem, x, spec.epsilon)? {
        return Ok(false);
    }
    let hess = problem.hessian(x)?;
    Ok(min_eig(&hess)? >= -lambda_eps)
}

/// Observed hitting outcome for one replica. `tau` is reported on the checked
/// grid, i.e. it upper-bounds the exact first entry; `None` means censored at
/// the budget. Divergent replicas are censored with `diverged = true`.
#[derive(Debug, Clone, Serialize)]
pub struct HittingRecord {
    pub replica: u64,
    pub tau: Option<u64>,
    pub budget: u64,
    pub diverged: bool,
    #[serde(skip)]
    pub witness: Option<DVector<f64>>,
}

impl HittingRecord {
    pub fn censored(&self) -> bool {
        self.tau.is_none()
    }
}

/// Runs `replicas` independent trajectories and records, for each, the first
/// checked iteration inside the region. Region tests are evaluated at
/// iteration 0 and every `check_every` iterations thereafter.
///
/// Replicas parallelize across the rayon pool with RNG streams tied to the
/// replica index, so results are independent of worker scheduling. Region
/// test failures inside a replica (or run divergence) censor that replica
/// without failing the batch.
pub fn measure_hitting(
    problem: &dyn Problem,
    cfg: &DynamicsConfig,
    spec: &RegionSpec,
    x0: &DVector<f64>,
    replicas: u64,
    check_every: u64,
) -> Result<Vec<HittingRecord>> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be >= 1".into()));
    }
    if check_every == 0 {
        return Err(Error::InvalidParameter("check_every must be >= 1".into()));
    }
    cfg.validate()?;
    spec.validate()?;
    problem.check_dim(x0)?;

    let records: Vec<HittingRecord> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let stop = |x: &DVector<f64>, n: u64| -> bool {
                if !n.is_multiple_of(check_every) {
                    return false;
                }
                spec.contains(problem, x).unwrap_or(false)
            };
            match run(problem, cfg, x0, replica, None, stop) {
                Ok(traj) => {
                    let hit = traj.stop_reason == StopReason::RegionHit;
                    HittingRecord {
                        replica,
                        tau: hit.then_some(traj.final_index),
                        budget: cfg.max_iters,
                        diverged: traj.stop_reason == StopReason::RadiusExceeded,
                        witness: hit.then_some(traj.final_iterate),
                    }
                }
                Err(_) => HittingRecord {
                    replica,
                    tau: None,
                    budget: cfg.max_iters,
                    diverged: true,
                    witness: None,
                },
            }
        })
        .collect();
    Ok(records)
}

/// Empirical exceedance `P(tau >= n)`: censored replicas count as exceeding.
pub fn exceedance(records: &[HittingRecord], n: u64) -> f64 {
    let late = records
        .iter()
        .filter(|r| r.tau.is_none_or(|tau| tau >= n))
        .count();
    late as f64 / records.len() as f64
}

/// Median of the observed hitting times, treating censored replicas as
/// `budget + 1` (so a censored majority yields `None`).
pub fn median_tau(records: &[HittingRecord]) -> Option<u64> {
    let budget = records.first()?.budget;
    let mut taus: Vec<u64> = records
        .iter()
        .map(|r| r.tau.unwrap_or(budget + 1))
        .collect();
    taus.sort_unstable();
    let mid = taus[(taus.len() - 1) / 2]; // lower median
    (mid <= budget).then_some(mid)
}

/// Hitting-time quantile on the same censoring convention as [`median_tau`].
pub fn tau_quantile(records: &[HittingRecord], q: f64) -> Option<u64> {
    let budget = records.first()?.budget;
    let mut taus: Vec<u64> = records
        .iter()
        .map(|r| r.tau.unwrap_or(budget + 1))
        .collect();
    taus.sort_unstable();
    let idx = ((taus.len() as f64 - 1.0) * q).round() as usize;
    let v = taus[idx.min(taus.len() - 1)];
    (v <= budget).then_some(v)
}
