//! Expected loss of the Ornstein-Uhlenbeck reference dynamics around a
//! quadratic saddle, plus an exact endpoint sampler used as its Monte Carlo
//! cross-check.
//!
//! For `F(x) = x^T H x` the Langevin diffusion is `dX = -2 H X dt + delta0 dW`
//! started at `X_0 = 0`, and `E F(X_t) = (delta0^2 / 4) sum_i (1 - e^(-4 lambda_i t))`
//! over the eigenvalues of `H`. With a strict saddle (`lambda_1 < 0`) the
//! expectation turns negative once `t` is large enough; taking
//! `t = log(2d) / (-4 lambda_1)` forces `E F(X_t) <= -d delta0^2 / 4`.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;

/// `E F(X_t)` of the OU process above, exactly.
pub fn ou_expected_loss(h: &DMatrix<f64>, delta0: f64, t: f64) -> Result<f64> {
    linalg::check_symmetric(h)?;
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be nonnegative, got {t}"
        )));
    }
    let quarter = 0.25 * delta0 * delta0;
    Ok(linalg::sym_eigenvalues(h)
        .iter()
        .map(|lambda| quarter * (1.0 - (-4.0 * lambda * t).exp()))
        .sum())
}

/// Per-eigendirection standard deviations of `X_t`. In the eigenbasis the
/// components are independent with variance
/// `delta0^2 (1 - e^(-4 lambda t)) / (4 lambda)` (and `delta0^2 t` at
/// `lambda = 0`).
pub fn ou_endpoint_std_devs(eigenvalues: &[f64], delta0: f64, t: f64) -> Vec<f64> {
    eigenvalues
        .iter()
        .map(|&lambda| {
            let var = if lambda.abs() < 1e-14 {
                delta0 * delta0 * t
            } else {
                delta0 * delta0 * (1.0 - (-4.0 * lambda * t).exp()) / (4.0 * lambda)
            };
            var.max(0.0).sqrt()
        })
        .collect()
}

/// Exact draw of `X_t` via the eigendecomposition of `H`.
pub fn ou_sample_endpoint(
    h: &DMatrix<f64>,
    delta0: f64,
    t: f64,
    rng: &mut dyn RngCore,
) -> Result<DVector<f64>> {
    linalg::check_symmetric(h)?;
    let (vals, vecs) = linalg::sym_eigen(h);
    let stds = ou_endpoint_std_devs(&vals, delta0, t);
    let z = DVector::from_fn(h.nrows(), |i, _| {
        let g: f64 = StandardNormal.sample(rng);
        stds[i] * g
    });
    Ok(&vecs * z)
}
