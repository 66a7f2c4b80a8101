//! Online matrix factorization and online PCA, with the `m x r` factor
//! flattened column-major so the dynamics stay shape-agnostic.
//!
//! Both problems share the residual `D = X X^T - M` and the Hessian quadratic
//! form `|X Z^T + Z X^T|_F^2 + 2 <X X^T - M, Z Z^T>` up to an overall scale.
//! The loss scales are chosen so that loss, gradient, Hessian, and stochastic
//! gradient are mutually consistent (the gradient is the derivative of the
//! loss, and the stochastic gradient is unbiased for it):
//!
//! - factorization: `F(X) = |D|_F^2 / 2`, `grad = 2 D X`,
//!   `sample_grad = <D, w> (w + w^T) X` with `w` an iid standard normal
//!   `m x m` matrix;
//! - PCA: `F(X) = |D|_F^2 / 4 + C`, `grad = D X`,
//!   `sample_grad = (D - w) X` with `w = x x^T - M`, `x ~ N(0, M)`, and `C`
//!   the offset making `F` the exact mean of the per-sample loss
//!   `|X X^T - x x^T|_F^2 / 4` (so `F >= 0` holds numerically).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::{gaussian_with_cov, psd_sqrt, Problem};
use crate::error::Result;
use crate::linalg;

fn unflatten(x: &DVector<f64>, m: usize, r: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(m, r, x.as_slice())
}

fn flatten_into(mat: &DMatrix<f64>, out: &mut DVector<f64>) {
    out.as_mut_slice().copy_from_slice(mat.as_slice());
}

/// Top-`r` factor of a PSD matrix: columns `sqrt(lambda_i) v_i`, so
/// `X X^T = M` exactly when `rank(M) <= r`.
fn top_factor(big_m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let (vals, vecs) = linalg::sym_eigen(big_m);
    let n = big_m.nrows();
    let mut x = DMatrix::zeros(n, r);
    for j in 0..r {
        let idx = n - 1 - j; // eigenvalues ascending; take the largest r
        let scale = vals[idx].max(0.0).sqrt();
        x.set_column(j, &(vecs.column(idx) * scale));
    }
    x
}

/// Shared Hessian-as-matrix construction: columns are
/// `scale * ((E X^T + X E^T) X + D E)` over the flattened basis matrices `E`.
fn factor_hessian(x_mat: &DMatrix<f64>, d_mat: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let (m, r) = (x_mat.nrows(), x_mat.ncols());
    let dim = m * r;
    let mut hess = DMatrix::zeros(dim, dim);
    let mut basis = DMatrix::zeros(m, r);
    for k in 0..dim {
        basis[(k % m, k / m)] = 1.0;
        let s = &basis * x_mat.transpose() + x_mat * basis.transpose();
        let col = (s * x_mat + d_mat * &basis) * scale;
        for i in 0..dim {
            hess[(i, k)] = col[(i % m, i / m)];
        }
        basis[(k % m, k / m)] = 0.0;
    }
    // Exact symmetry up to rounding; symmetrize for the eigen routines.
    0.5 * (&hess + hess.transpose())
}

/// Shared validity check for the factor-problem constant bundles: the
/// statements assume `Gamma >= 1` and `|M|_F <= Gamma`.
fn factor_bundle_common(big_m: &DMatrix<f64>, gamma: f64) -> Result<()> {
    if gamma < 1.0 {
        return Err(crate::error::Error::InvalidParameter(
            "factor-problem constants need gamma >= 1".into(),
        ));
    }
    if big_m.norm() > gamma {
        return Err(crate::error::Error::InvalidParameter(format!(
            "constants need |M|_F <= gamma, got |M|_F = {} > {gamma}",
            big_m.norm()
        )));
    }
    Ok(())
}

fn gamma_ball_factor(m: usize, r: usize, gamma: f64, rng: &mut dyn RngCore) -> DVector<f64> {
    let g = DMatrix::<f64>::from_fn(m, r, |_, _| StandardNormal.sample(rng));
    let ggt_norm = (&g * g.transpose()).norm();
    let u: f64 = rng.gen();
    let scale = if ggt_norm > 0.0 {
        (u * gamma / ggt_norm).sqrt()
    } else {
        0.0
    };
    let scaled = g * scale;
    DVector::from_column_slice(scaled.as_slice())
}

/// Online matrix factorization: minimize `|X X^T - M|_F^2 / 2` from rank-one
/// Gaussian measurements `f(X, w) = <w, X X^T - M>^2 / 2`.
#[derive(Debug, Clone)]
pub struct MatrixFactorizationProblem {
    big_m: DMatrix<f64>,
    r: usize,
}

impl MatrixFactorizationProblem {
    pub fn new(big_m: DMatrix<f64>, r: usize) -> Result<Self> {
        linalg::check_symmetric(&big_m)?;
        Ok(MatrixFactorizationProblem { big_m, r })
    }

    pub fn target(&self) -> &DMatrix<f64> {
        &self.big_m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.big_m.nrows(), self.r)
    }

    fn residual(&self, x: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let xm = unflatten(x, self.big_m.nrows(), self.r);
        let d = &xm * xm.transpose() - &self.big_m;
        (xm, d)
    }
}

impl Problem for MatrixFactorizationProblem {
    fn dim(&self) -> usize {
        self.big_m.nrows() * self.r
    }

    fn name(&self) -> &'static str {
        "matrix_factorization"
    }

    fn loss(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let (_, d) = self.residual(x);
        Ok(0.5 * d.norm_squared())
    }

    fn grad_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) -> Result<()> {
        self.check_dim(x)?;
        let (xm, d) = self.residual(x);
        let g = d * xm * 2.0;
        flatten_into(&g, out);
        Ok(())
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let (xm, d) = self.residual(x);
        Ok(factor_hessian(&xm, &d, 2.0))
    }

    fn sample_grad_into(
        &self,
        x: &DVector<f64>,
        out: &mut DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.check_dim(x)?;
        let (xm, d) = self.residual(x);
        let m = self.big_m.nrows();
        let w = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng));
        let inner = w.dot(&d); // <D, w> entrywise
        let g = (&w + w.transpose()) * xm * inner;
        flatten_into(&g, out);
        Ok(())
    }

    fn minimizer(&self) -> Option<DVector<f64>> {
        let x = top_factor(&self.big_m, self.r);
        Some(DVector::from_column_slice(x.as_slice()))
    }

    fn grad_norm_bound(&self, radius: f64) -> f64 {
        2.0 * radius * (radius * radius + self.big_m.norm())
    }

    fn sample_in_gamma_ball(&self, gamma: f64, rng: &mut dyn RngCore) -> DVector<f64> {
        gamma_ball_factor(self.big_m.nrows(), self.r, gamma, rng)
    }

    /// Over `|X X^T|_F <= Gamma` (with `|M|_F <= Gamma`, `Gamma >= 1`):
    /// `C2 = 24 Gamma`, `C3 = max(12 sqrt(Gamma), 24 Gamma)`,
    /// `D4 = (4m + 2r) Gamma`, `B1 = c m r Gamma^4`, `B2 = c m r Gamma^3`,
    /// `c7 = 4 lambda_max(M)`, `D7 = max(|M|_F, 8 m lambda_max(M)^3)`.
    fn analytic_constants(
        &self,
        gamma: f64,
        calib: &crate::constants::CalibratedC,
    ) -> Result<crate::constants::ConstantBundle> {
        let (m, r) = self.shape();
        factor_bundle_common(&self.big_m, gamma)?;
        let lambda_max = linalg::sym_eigenvalues(&self.big_m).last().copied().unwrap();
        let mr = (m * r) as f64;
        Ok(crate::constants::ConstantBundle {
            provenance: crate::constants::Provenance::Analytic,
            gamma,
            c2: 24.0 * gamma,
            c3: (12.0 * gamma.sqrt()).max(24.0 * gamma),
            c0: 2.0 * gamma * gamma,
            b1: calib.b1 * mr * gamma.powi(4),
            b2: calib.b2 * mr * gamma.powi(3),
            d4: (4 * m + 2 * r) as f64 * gamma,
            c7: 4.0 * lambda_max,
            d7: self
                .big_m
                .norm()
                .max(8.0 * m as f64 * lambda_max.powi(3)),
        })
    }
}

/// Online PCA of samples `x_i ~ N(0, M)`: minimize
/// `F(X) = |X X^T - M|_F^2 / 4 + C` where the per-sample loss is
/// `|X X^T - x_i x_i^T|_F^2 / 4` and `C = (|M|_F^2 + tr(M)^2) / 4` is its
/// mean at `X X^T = M`. `C` has the closed form `E |x x^T - M|_F^2 / 4`,
/// exact for any symmetric PSD `M` (the Monte Carlo route is kept as a test
/// oracle).
#[derive(Debug, Clone)]
pub struct OnlinePcaProblem {
    big_m: DMatrix<f64>,
    sqrt_m: DMatrix<f64>,
    r: usize,
    offset: f64,
}

impl OnlinePcaProblem {
    pub fn new(big_m: DMatrix<f64>, r: usize) -> Result<Self> {
        linalg::check_symmetric(&big_m)?;
        let sqrt_m = psd_sqrt(&big_m);
        let offset = 0.25 * (big_m.norm_squared() + big_m.trace().powi(2));
        Ok(OnlinePcaProblem {
            big_m,
            sqrt_m,
            r,
            offset,
        })
    }

    pub fn target(&self) -> &DMatrix<f64> {
        &self.big_m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.big_m.nrows(), self.r)
    }

    /// The additive constant making the loss the exact mean of the
    /// per-sample loss.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn residual(&self, x: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let xm = unflatten(x, self.big_m.nrows(), self.r);
        let d = &xm * xm.transpose() - &self.big_m;
        (xm, d)
    }
}

impl Problem for OnlinePcaProblem {
    fn dim(&self) -> usize {
        self.big_m.nrows() * self.r
    }

    fn name(&self) -> &'static str {
        "online_pca"
    }

    fn loss(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let (_, d) = self.residual(x);
        Ok(0.25 * d.norm_squared() + self.offset)
    }

    fn grad_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) -> Result<()> {
        self.check_dim(x)?;
        let (xm, d) = self.residual(x);
        let g = d * xm;
        flatten_into(&g, out);
        Ok(())
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let (xm, d) = self.residual(x);
        Ok(factor_hessian(&xm, &d, 1.0))
    }

    fn sample_grad_into(
        &self,
        x: &DVector<f64>,
        out: &mut DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        self.check_dim(x)?;
        let (xm, d) = self.residual(x);
        let xi = gaussian_with_cov(&self.sqrt_m, rng);
        // w = x x^T - M, so D - w = X X^T - x x^T
        let w = &xi * xi.transpose() - &self.big_m;
        let g = (d - w) * xm;
        flatten_into(&g, out);
        Ok(())
    }

    fn minimizer(&self) -> Option<DVector<f64>> {
        let x = top_factor(&self.big_m, self.r);
        Some(DVector::from_column_slice(x.as_slice()))
    }

    fn grad_norm_bound(&self, radius: f64) -> f64 {
        radius * (radius * radius + self.big_m.norm())
    }

    fn sample_in_gamma_ball(&self, gamma: f64, rng: &mut dyn RngCore) -> DVector<f64> {
        gamma_ball_factor(self.big_m.nrows(), self.r, gamma, rng)
    }

    /// Over `|X X^T|_F <= Gamma` (with `|M|_F <= Gamma`, `Gamma >= 1`):
    /// `C2 = 24 Gamma`, `C3 = 12 sqrt(Gamma)`, `D4 = 6 m Gamma`,
    /// `B1 = c Gamma^2 tr(M)^2`, `B2 = c tr(M)^2`, and the same coercivity
    /// pair as the factorization problem.
    fn analytic_constants(
        &self,
        gamma: f64,
        calib: &crate::constants::CalibratedC,
    ) -> Result<crate::constants::ConstantBundle> {
        let (m, _) = self.shape();
        factor_bundle_common(&self.big_m, gamma)?;
        let lambda_max = linalg::sym_eigenvalues(&self.big_m).last().copied().unwrap();
        let trace = self.big_m.trace();
        Ok(crate::constants::ConstantBundle {
            provenance: crate::constants::Provenance::Analytic,
            gamma,
            c2: 24.0 * gamma,
            c3: 12.0 * gamma.sqrt(),
            c0: gamma * gamma + self.offset,
            b1: calib.b1 * gamma * gamma * trace * trace,
            b2: calib.b2 * trace * trace,
            d4: 6.0 * m as f64 * gamma,
            c7: 4.0 * lambda_max,
            d7: self
                .big_m
                .norm()
                .max(8.0 * m as f64 * lambda_max.powi(3)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{finite_diff_grad, Spectrum};
    use crate::rng::aux_stream;
    use approx::assert_relative_eq;

    fn mf_instance() -> MatrixFactorizationProblem {
        let spectrum = Spectrum::Explicit {
            values: vec![1.0, 0.5],
        };
        let eigs = spectrum.values(2).unwrap();
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = eigs[0];
        m[(1, 1)] = eigs[1];
        MatrixFactorizationProblem::new(m, 2).unwrap()
    }

    #[test]
    fn loss_zero_at_exact_factorization() {
        let p = mf_instance();
        let x = p.minimizer().unwrap();
        assert_relative_eq!(p.loss(&x).unwrap(), 0.0, epsilon = 1e-24);
        assert_relative_eq!(p.grad(&x).unwrap().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn grad_zero_at_origin() {
        let p = mf_instance();
        let x = DVector::zeros(p.dim());
        assert_eq!(p.grad(&x).unwrap(), DVector::zeros(p.dim()));
    }

    #[test]
    fn grad_matches_finite_differences() {
        let p = mf_instance();
        let mut rng = aux_stream(5, 1);
        let x = p.sample_in_gamma_ball(2.0, &mut rng);
        let g = p.grad(&x).unwrap();
        let fd = finite_diff_grad(&p, &x).unwrap();
        assert!((&g - &fd).norm() / (1.0 + g.norm()) < 1e-8);
    }

    #[test]
    fn hessian_realizes_quadratic_form() {
        // <Z, H Z> = |X Z^T + Z X^T|_F^2 + 2 <X X^T - M, Z Z^T> at the
        // factorization scale.
        let p = mf_instance();
        let mut rng = aux_stream(6, 2);
        let x = p.sample_in_gamma_ball(2.0, &mut rng);
        let z = p.sample_in_gamma_ball(1.0, &mut rng);
        let h = p.hessian(&x).unwrap();
        let got = z.dot(&(&h * &z));
        let xm = unflatten(&x, 4, 2);
        let zm = unflatten(&z, 4, 2);
        let s = &xm * zm.transpose() + &zm * xm.transpose();
        let d = &xm * xm.transpose() - p.target();
        let want = s.norm_squared() + 2.0 * d.dot(&(&zm * zm.transpose()));
        assert_relative_eq!(got, want, max_relative = 1e-10);
    }

    #[test]
    fn pca_offset_matches_monte_carlo() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 0.5;
        m[(2, 2)] = 0.25;
        let p = OnlinePcaProblem::new(m.clone(), 2).unwrap();
        // Monte Carlo estimate of E |x x^T - M|_F^2 / 4.
        let mut rng = aux_stream(7, 3);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = gaussian_with_cov(&p.sqrt_m, &mut rng);
            acc += 0.25 * (&x * x.transpose() - &m).norm_squared();
        }
        let mc = acc / n as f64;
        // tr(M)^2 = 3.0625, |M|^2 = 1.3125 -> C = 1.09375; MC sd ~ 2.6e-2/sqrt(n)
        assert_relative_eq!(p.offset(), 1.09375, epsilon = 1e-12);
        assert!((mc - p.offset()).abs() < 0.02);
    }

    #[test]
    fn pca_loss_nonnegative_and_consistent() {
        let m = DMatrix::identity(3, 3);
        let p = OnlinePcaProblem::new(m, 2).unwrap();
        let mut rng = aux_stream(8, 4);
        for _ in 0..50 {
            let x = p.sample_in_gamma_ball(3.0, &mut rng);
            assert!(p.loss(&x).unwrap() >= 0.0);
        }
        let x = p.sample_in_gamma_ball(2.0, &mut rng);
        let fd = finite_diff_grad(&p, &x).unwrap();
        let g = p.grad(&x).unwrap();
        assert!((&g - &fd).norm() / (1.0 + g.norm()) < 1e-8);
    }
}
