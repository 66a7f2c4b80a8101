//! The four steppers and the trajectory runner.
//!
//! One shared update serves all methods; the method tag only selects the
//! gradient source (stochastic vs population) and the noise exponent:
//!
//! ```text
//! SGLD:  x - eta_{n+1} * sample_grad(x) + delta0 * sqrt(eta_{n+1}) * zeta
//! SGD:   the same with delta0 forced to 0
//! ULA:   x - eta_{n+1} * grad(x)        + delta0 * sqrt(eta_{n+1}) * zeta
//! PGD:   x - eta_{n+1} * grad(x)        + delta0 * eta_{n+1}       * zeta
//! ```
//!
//! `zeta ~ N(0, I_d)` is drawn from the dedicated noise stream on every step
//! for every method (even when its coefficient is zero), so runs with equal
//! seeds see identical `zeta` sequences regardless of method.

use nalgebra::DVector;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::rng::replica_streams;
use crate::schedule::StepSchedule;

/// Iterates are declared divergent when their norm exceeds
/// `RADIUS_GUARD_FACTOR * (1 + |x0|)`; the analysis assumes bounded iterates.
pub const RADIUS_GUARD_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgld,
    Sgd,
    Ula,
    Pgd,
}

impl Method {
    fn uses_stochastic_grad(self) -> bool {
        matches!(self, Method::Sgld | Method::Sgd)
    }

    /// Noise coefficient in the step size: `sqrt(eta)` for the Langevin
    /// family, `eta` for perturbed gradient descent.
    fn noise_step_scale(self, eta: f64) -> f64 {
        match self {
            Method::Pgd => eta,
            _ => eta.sqrt(),
        }
    }

    fn volatility(self, delta0: f64) -> f64 {
        match self {
            Method::Sgd => 0.0,
            _ => delta0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub method: Method,
    pub delta0: f64,
    pub schedule: StepSchedule,
    pub max_iters: u64,
    pub seed: u64,
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta0 < 0.0 || !self.delta0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta0 must be nonnegative and finite, got {}",
                self.delta0
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        StepSchedule::new(self.schedule.eta0, self.schedule.alpha)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    RegionHit,
    RadiusExceeded,
}

/// One recorded diagnostic row of a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySample {
    pub iteration: u64,
    pub loss: f64,
    pub grad_norm: f64,
}

/// An SGLD/comparator run: thinned iterates, per-sample diagnostics, and the
/// stopping record.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub iterates: Vec<(u64, DVector<f64>)>,
    pub stop_reason: StopReason,
    pub final_index: u64,
    pub final_iterate: DVector<f64>,
}

/// Single step of the selected method, computing `X_{n+1}` from `X_n` with
/// step size `eta_{n+1}`. `n` is the index of the current iterate (`n >= 0`).
#[allow(clippy::too_many_arguments)]
pub fn step(
    method: Method,
    problem: &dyn Problem,
    x: &DVector<f64>,
    n: u64,
    delta0: f64,
    schedule: &StepSchedule,
    grad_rng: &mut dyn RngCore,
    noise_rng: &mut dyn RngCore,
) -> Result<DVector<f64>> {
    let mut next = x.clone();
    let mut grad_buf = DVector::zeros(problem.dim());
    step_into(
        method, problem, n, delta0, schedule, grad_rng, noise_rng, &mut next, &mut grad_buf,
    )?;
    Ok(next)
}

/// In-place variant of [`step`]: `x` is updated to `X_{n+1}` using `grad_buf`
/// as scratch.
#[allow(clippy::too_many_arguments)]
fn step_into(
    method: Method,
    problem: &dyn Problem,
    n: u64,
    delta0: f64,
    schedule: &StepSchedule,
    grad_rng: &mut dyn RngCore,
    noise_rng: &mut dyn RngCore,
    x: &mut DVector<f64>,
    grad_buf: &mut DVector<f64>,
) -> Result<()> {
    let eta = schedule.step_at(n + 1);
    if method.uses_stochastic_grad() {
        problem.sample_grad_into(x, grad_buf, grad_rng)?;
    } else {
        problem.grad_into(x, grad_buf)?;
    }
    let noise_scale = method.volatility(delta0) * method.noise_step_scale(eta);
    for i in 0..x.len() {
        let zeta: f64 = StandardNormal.sample(noise_rng);
        x[i] += -eta * grad_buf[i] + noise_scale * zeta;
    }
    Ok(())
}

/// Runs the dynamics from `x0` until `stop` fires, the radius guard trips, or
/// the iteration budget elapses.
///
/// `stop` is evaluated on `(iterate, iteration index)` before any step is
/// taken (so a region containing `x0` yields `final_index = 0`) and after
/// every step. Diagnostics are stored every `thin` iterations; pass `None`
/// for the default `max(1, max_iters / 10^4)`. A non-finite iterate aborts
/// with the offending index.
pub fn run(
    problem: &dyn Problem,
    cfg: &DynamicsConfig,
    x0: &DVector<f64>,
    replica: u64,
    thin: Option<u64>,
    mut stop: impl FnMut(&DVector<f64>, u64) -> bool,
) -> Result<Trajectory> {
    cfg.validate()?;
    problem.check_dim(x0)?;
    let thin = thin.unwrap_or_else(|| (cfg.max_iters / 10_000).max(1));
    let radius_guard = RADIUS_GUARD_FACTOR * (1.0 + x0.norm());
    let mut streams = replica_streams(cfg.seed, replica);

    let mut x = x0.clone();
    let mut grad_buf = DVector::zeros(problem.dim());
    let mut samples = Vec::new();
    let mut iterates = Vec::new();

    fn record(
        problem: &dyn Problem,
        x: &DVector<f64>,
        n: u64,
        samples: &mut Vec<TrajectorySample>,
        iterates: &mut Vec<(u64, DVector<f64>)>,
    ) -> Result<()> {
        let loss = problem.loss(x)?;
        let grad = problem.grad(x)?;
        samples.push(TrajectorySample {
            iteration: n,
            loss,
            grad_norm: grad.norm(),
        });
        iterates.push((n, x.clone()));
        Ok(())
    }

    record(problem, &x, 0, &mut samples, &mut iterates)?;
    if stop(&x, 0) {
        return Ok(Trajectory {
            samples,
            iterates,
            stop_reason: StopReason::RegionHit,
            final_index: 0,
            final_iterate: x,
        });
    }

    let mut n = 0u64;
    let stop_reason = loop {
        step_into(
            cfg.method,
            problem,
            n,
            cfg.delta0,
            &cfg.schedule,
            &mut streams.grad,
            &mut streams.noise,
            &mut x,
            &mut grad_buf,
        )?;
        n += 1;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteIterate { index: n });
        }
        if n.is_multiple_of(thin) {
            record(problem, &x, n, &mut samples, &mut iterates)?;
        }
        if stop(&x, n) {
            break StopReason::RegionHit;
        }
        if x.norm() > radius_guard {
            break StopReason::RadiusExceeded;
        }
        if n >= cfg.max_iters {
            break StopReason::Budget;
        }
    };
    if samples.last().map(|s| s.iteration) != Some(n) {
        record(problem, &x, n, &mut samples, &mut iterates)?;
    }
    Ok(Trajectory {
        samples,
        iterates,
        stop_reason,
        final_index: n,
        final_iterate: x,
    })
}
