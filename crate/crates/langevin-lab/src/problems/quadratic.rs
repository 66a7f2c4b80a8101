//! Quadratic objectives: the scalar test problem `F(x) = x^2/2` and the
//! saddle model `F(x) = x^T H x` used by the escape experiments.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{sample_standard_normal, Problem};
use crate::error::{Error, Result};
use crate::linalg;

/// `F(x) = x^2 / 2` in one dimension with a noiseless stochastic gradient
/// (`xi_n = 0`). SGLD on this problem is exactly
/// `X_n = (1 - eta_n) X_{n-1} + delta0 sqrt(eta_n) zeta_n`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarQuadratic;

impl Problem for ScalarQuadratic {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &'static str {
        "scalar_quadratic"
    }

    fn loss(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(0.5 * x[0] * x[0])
    }

    fn grad_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) -> Result<()> {
        self.check_dim(x)?;
        out[0] = x[0];
        Ok(())
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        Ok(DMatrix::from_element(1, 1, 1.0))
    }

    fn sample_grad_into(
        &self,
        x: &DVector<f64>,
        out: &mut DVector<f64>,
        _rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.grad_into(x, out)
    }

    fn minimizer(&self) -> Option<DVector<f64>> {
        Some(DVector::zeros(1))
    }

    fn grad_norm_bound(&self, radius: f64) -> f64 {
        radius
    }
}

/// `F(x) = x^T H x` for a symmetric `H`, so `grad F = 2 H x` and
/// `hessian = 2 H`. A strict saddle sits at the origin whenever
/// `lambda_min(H) < 0`; note the loss is negative along those directions,
/// which is the whole point of the escape experiments.
///
/// The stochastic gradient is the population gradient by default. An
/// optional additive Gaussian noise `xi ~ N(0, noise_std^2 I)` (sub-Gaussian,
/// so all moment assumptions hold) lets the saddle-escape conditions with
/// nonzero `xi` be exercised.
#[derive(Debug, Clone)]
pub struct QuadraticSaddle {
    h: DMatrix<f64>,
    noise_std: f64,
    opnorm: f64,
}

impl QuadraticSaddle {
    pub fn new(h: DMatrix<f64>, noise_std: f64) -> Result<Self> {
        linalg::check_symmetric(&h)?;
        if noise_std < 0.0 {
            return Err(Error::InvalidParameter(
                "noise_std must be nonnegative".into(),
            ));
        }
        let opnorm = linalg::sym_opnorm(&h);
        Ok(QuadraticSaddle {
            h,
            noise_std,
            opnorm,
        })
    }

    pub fn form_matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

impl Problem for QuadraticSaddle {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn name(&self) -> &'static str {
        "quadratic_saddle"
    }

    fn loss(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(x.dot(&(&self.h * x)))
    }

    fn grad_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) -> Result<()> {
        self.check_dim(x)?;
        self.h.mul_to(x, out);
        *out *= 2.0;
        Ok(())
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        Ok(2.0 * &self.h)
    }

    fn sample_grad_into(
        &self,
        x: &DVector<f64>,
        out: &mut DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.grad_into(x, out)?;
        if self.noise_std > 0.0 {
            for v in out.iter_mut() {
                *v += self.noise_std * sample_standard_normal(rng);
            }
        }
        Ok(())
    }

    fn grad_norm_bound(&self, radius: f64) -> f64 {
        2.0 * self.opnorm * radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::aux_stream;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_quadratic_basics() {
        let p = ScalarQuadratic;
        let x = DVector::from_row_slice(&[3.0]);
        assert_eq!(p.loss(&x).unwrap(), 4.5);
        assert_eq!(p.grad(&x).unwrap()[0], 3.0);
        let mut rng = aux_stream(0, 0);
        // Noiseless: sample gradient is exactly the gradient.
        assert_eq!(p.sample_grad(&x, &mut rng).unwrap()[0], 3.0);
    }

    #[test]
    fn saddle_loss_and_hessian() {
        let h = DMatrix::from_diagonal(&DVector::from_row_slice(&[-1.0, 2.0]));
        let p = QuadraticSaddle::new(h.clone(), 0.0).unwrap();
        let x = DVector::from_row_slice(&[1.0, 1.0]);
        // x^T H x = -1 + 2
        assert_eq!(p.loss(&x).unwrap(), 1.0);
        assert_eq!(p.hessian(&x).unwrap(), 2.0 * h);
        assert_relative_eq!(
            p.grad(&x).unwrap(),
            DVector::from_row_slice(&[-2.0, 4.0]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = ScalarQuadratic;
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        assert!(p.loss(&x).is_err());
        assert!(p.grad(&x).is_err());
        assert!(p.hessian(&x).is_err());
    }
}
