//! Exact variance recursions of the scalar test dynamics with unit
//! volatility (`F(x) = x^2/2`, `xi = 0`, `delta0 = 1`, `X_0 = Y_0 = 0`):
//!
//! ```text
//! SGLD:  V_n = (1 - eta_n)^2 V_{n-1} + eta_n      (limit 1/2)
//! PGD:   V_n = (1 - eta_n)^2 V_{n-1} + eta_n^2    (limit 0)
//! ```
//!
//! The iterates are Gaussian, so these are the exact per-step variances the
//! ergodicity-contrast experiments compare against.

use crate::dynamics::Method;
use crate::error::{Error, Result};
use crate::schedule::StepSchedule;

/// Variance after `n` steps. `n = 0` returns 0.
pub fn variance_recursion(method: Method, schedule: &StepSchedule, n: u64) -> Result<f64> {
    Ok(*variance_recursion_checkpoints(method, schedule, &[n])?
        .last()
        .unwrap())
}

/// Variances at several checkpoints in one pass. `checkpoints` must be
/// nondecreasing.
pub fn variance_recursion_checkpoints(
    method: Method,
    schedule: &StepSchedule,
    checkpoints: &[u64],
) -> Result<Vec<f64>> {
    let noise_is_sqrt = match method {
        Method::Sgld => true,
        Method::Pgd => false,
        _ => {
            return Err(Error::InvalidParameter(
                "variance recursion is defined for SGLD and PGD".into(),
            ))
        }
    };
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "checkpoints must be nondecreasing".into(),
        ));
    }
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut v = 0.0f64;
    let mut n = 0u64;
    for &target in checkpoints {
        while n < target {
            n += 1;
            let eta = schedule.step_at(n);
            let contraction = 1.0 - eta;
            let injected = if noise_is_sqrt { eta } else { eta * eta };
            v = contraction * contraction * v + injected;
        }
        out.push(v);
    }
    Ok(out)
}
