//! Online linear regression with Gaussian inputs.
//!
//! Samples are `omega_n = (a_n, b_n)` with `a_n ~ N(0, A)` and
//! `b_n = a_n^T x* + eps_n`, `eps_n ~ N(0, 1)`. The per-sample loss
//! `f(x, omega) = (a^T x - b)^2 / 2` has population mean
//! `F(x) = (x - x*)^T A (x - x*) / 2 + 1/2`, whose gradient is `A (x - x*)`
//! and whose Hessian is `A` everywhere.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{gaussian_with_cov, psd_sqrt, sample_standard_normal, Problem};
use crate::error::Result;
use crate::linalg;

#[derive(Debug, Clone)]
pub struct LinearRegressionProblem {
    a: DMatrix<f64>,
    sqrt_a: DMatrix<f64>,
    x_star: DVector<f64>,
    opnorm: f64,
}

impl LinearRegressionProblem {
    pub fn new(a: DMatrix<f64>, x_star: DVector<f64>) -> Result<Self> {
        linalg::check_symmetric(&a)?;
        if x_star.len() != a.nrows() {
            return Err(crate::error::Error::DimensionMismatch {
                expected: a.nrows(),
                got: x_star.len(),
            });
        }
        let sqrt_a = psd_sqrt(&a);
        let opnorm = linalg::sym_opnorm(&a);
        Ok(LinearRegressionProblem {
            a,
            sqrt_a,
            x_star,
            opnorm,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }
}

impl Problem for LinearRegressionProblem {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn name(&self) -> &'static str {
        "linear_regression"
    }

    fn loss(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let u = x - &self.x_star;
        Ok(0.5 * u.dot(&(&self.a * &u)) + 0.5)
    }

    fn grad_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) -> Result<()> {
        self.check_dim(x)?;
        let u = x - &self.x_star;
        self.a.mul_to(&u, out);
        Ok(())
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        Ok(self.a.clone())
    }

    fn sample_grad_into(
        &self,
        x: &DVector<f64>,
        out: &mut DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.check_dim(x)?;
        let a = gaussian_with_cov(&self.sqrt_a, rng);
        let eps = sample_standard_normal(rng);
        let b = a.dot(&self.x_star) + eps;
        let residual = a.dot(x) - b;
        out.copy_from(&a);
        *out *= residual;
        Ok(())
    }

    fn minimizer(&self) -> Option<DVector<f64>> {
        Some(self.x_star.clone())
    }

    fn grad_norm_bound(&self, radius: f64) -> f64 {
        self.opnorm * (radius + self.x_star.norm())
    }

    /// Over `|x - x*| <= Gamma`: `D4 = C2 = C3 = tr(A)`,
    /// `B1 = c tr(A)^3 Gamma^2`, `B2 = c tr(A)^2 Gamma^2`,
    /// `c7 = lambda_min(A)/4`, `D7 = lambda_min(A) |x*|^2 / 4`.
    fn analytic_constants(
        &self,
        gamma: f64,
        calib: &crate::constants::CalibratedC,
    ) -> Result<crate::constants::ConstantBundle> {
        if gamma <= 0.0 {
            return Err(crate::error::Error::InvalidParameter(
                "gamma must be positive".into(),
            ));
        }
        let trace = self.a.trace();
        let lambda_min = linalg::sym_eigenvalues(&self.a)[0];
        Ok(crate::constants::ConstantBundle {
            provenance: crate::constants::Provenance::Analytic,
            gamma,
            c2: trace,
            c3: trace,
            c0: 0.5 * self.opnorm * gamma * gamma + 0.5,
            b1: calib.b1 * trace.powi(3) * gamma * gamma,
            b2: calib.b2 * trace.powi(2) * gamma * gamma,
            d4: trace,
            c7: 0.25 * lambda_min,
            d7: 0.25 * lambda_min * self.x_star.norm_squared(),
        })
    }
}
