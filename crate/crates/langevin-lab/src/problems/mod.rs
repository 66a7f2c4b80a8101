//! The objective suite. Each problem exposes the population loss, gradient,
//! and Hessian plus a stochastic-gradient sampler whose noise
//! `xi = sample_grad - grad` is mean zero with the moments the hitting-time
//! bounds assume.
//!
//! Matrix-valued problems flatten their `m x r` factor column-major into a
//! vector of length `m*r`, so one stepper serves every problem.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::aux_stream;

mod matrix;
mod quadratic;
mod regression;

pub use matrix::{MatrixFactorizationProblem, OnlinePcaProblem};
pub use quadratic::{QuadraticSaddle, ScalarQuadratic};
pub use regression::LinearRegressionProblem;

/// An objective with population loss/gradient/Hessian and a stochastic
/// gradient sampler. Implementations are immutable after construction and
/// take explicit random streams, so parallel replicas share nothing mutable.
pub trait Problem: Send + Sync {
    /// Flattened parameter dimension `d`.
    fn dim(&self) -> usize;

    fn name(&self) -> &'static str;

    /// Population loss `F(x)`.
    fn loss(&self, x: &DVector<f64>) -> Result<f64>;

    /// Population gradient, written into `out`.
    fn grad_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) -> Result<()>;

    /// Dense population Hessian acting on the flattened parameter.
    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// One stochastic-gradient draw, written into `out`. Unbiased for
    /// [`Problem::grad_into`].
    fn sample_grad_into(
        &self,
        x: &DVector<f64>,
        out: &mut DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<()>;

    /// Known minimizer, when the problem has one in closed form.
    fn minimizer(&self) -> Option<DVector<f64>> {
        None
    }

    /// Upper bound on `|grad F(x)|` over the ball `|x| <= radius`.
    fn grad_norm_bound(&self, radius: f64) -> f64;

    /// Analytic assumption-constant bundle over the Gamma-region, for the
    /// problem families with closed-form constants. `calib` supplies the
    /// calibrated universal constant on the noise-moment bounds.
    fn analytic_constants(
        &self,
        _gamma: f64,
        _calib: &crate::constants::CalibratedC,
    ) -> Result<crate::constants::ConstantBundle> {
        Err(Error::UnsupportedProblem(format!(
            "{} has no analytic constant bundle",
            self.name()
        )))
    }

    /// Random parameter point in the problem's Gamma-ball (see the constants
    /// module): `|x - x*| <= gamma` for vector problems, `|X X^T|_F <= gamma`
    /// for matrix-factor problems. The default draws uniformly from the ball
    /// around the minimizer (or the origin).
    fn sample_in_gamma_ball(&self, gamma: f64, rng: &mut dyn RngCore) -> DVector<f64> {
        let center = self
            .minimizer()
            .unwrap_or_else(|| DVector::zeros(self.dim()));
        center + uniform_ball(self.dim(), gamma, rng)
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        self.grad_into(x, &mut out)?;
        Ok(out)
    }

    fn sample_grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        self.sample_grad_into(x, &mut out, rng)?;
        Ok(out)
    }
}

/// Uniform draw from the centered ball of the given radius.
pub fn uniform_ball(dim: usize, radius: f64, rng: &mut dyn RngCore) -> DVector<f64> {
    let mut dir = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
    let norm = dir.norm();
    if norm > 0.0 {
        dir /= norm;
    }
    let u: f64 = rng.gen();
    dir * (radius * u.powf(1.0 / dim as f64))
}

fn standard_normal_vec(dim: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// Eigenvalue profile for the covariance/target matrices, per run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    /// All eigenvalues one.
    Flat,
    /// `lambda_k = k^(-beta)`, `k = 1..=n`.
    Decay { beta: f64 },
    /// Explicit eigenvalue list.
    Explicit { values: Vec<f64> },
}

impl Spectrum {
    pub fn values(&self, n: usize) -> Result<Vec<f64>> {
        let vals = match self {
            Spectrum::Flat => vec![1.0; n],
            Spectrum::Decay { beta } => (1..=n).map(|k| (k as f64).powf(-beta)).collect(),
            Spectrum::Explicit { values } => {
                if values.len() != n {
                    return Err(Error::config(
                        "spectrum.values",
                        format!("expected {n} eigenvalues, got {}", values.len()),
                    ));
                }
                values.clone()
            }
        };
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config(
                "spectrum",
                "eigenvalues must be finite and nonnegative",
            ));
        }
        Ok(vals)
    }
}

/// How the regression truth `x*` is generated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XStar {
    #[default]
    Zero,
    Random { seed: u64, norm: f64 },
}

/// Problem construction from run configs: a named problem plus its
/// parameters (dimension, spectrum, rank, seeds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    ScalarQuadratic,
    QuadraticSaddle {
        eigenvalues: Vec<f64>,
        #[serde(default)]
        rotate_seed: Option<u64>,
        #[serde(default)]
        noise_std: f64,
    },
    LinearRegression {
        dim: usize,
        spectrum: Spectrum,
        #[serde(default)]
        x_star: XStar,
        #[serde(default)]
        rotate_seed: Option<u64>,
    },
    MatrixFactorization {
        m: usize,
        r: usize,
        spectrum: Spectrum,
        #[serde(default)]
        rotate_seed: Option<u64>,
    },
    OnlinePca {
        dim: usize,
        r: usize,
        spectrum: Spectrum,
        #[serde(default)]
        rotate_seed: Option<u64>,
    },
}

/// Symmetric PSD matrix with `rank` nonzero eigenvalues from `spectrum`,
/// either diagonal or in a seeded random orthogonal basis.
fn psd_from_spectrum(
    n: usize,
    rank: usize,
    spectrum: &Spectrum,
    rotate_seed: Option<u64>,
) -> Result<DMatrix<f64>> {
    let eigs = spectrum.values(rank)?;
    let mut full = vec![0.0; n];
    full[..rank].copy_from_slice(&eigs);
    Ok(match rotate_seed {
        None => DMatrix::from_diagonal(&DVector::from_row_slice(&full)),
        Some(seed) => {
            let mut rng = aux_stream(seed, 0xA11);
            linalg::symmetric_with_spectrum(&full, &mut rng)
        }
    })
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Box<dyn Problem>> {
        match self {
            ProblemConfig::ScalarQuadratic => Ok(Box::new(ScalarQuadratic)),
            ProblemConfig::QuadraticSaddle {
                eigenvalues,
                rotate_seed,
                noise_std,
            } => {
                if eigenvalues.is_empty() {
                    return Err(Error::config("eigenvalues", "must be non-empty"));
                }
                if *noise_std < 0.0 {
                    return Err(Error::config("noise_std", "must be nonnegative"));
                }
                let h = match rotate_seed {
                    None => DMatrix::from_diagonal(&DVector::from_row_slice(eigenvalues)),
                    Some(seed) => {
                        let mut rng = aux_stream(*seed, 0xA11);
                        linalg::symmetric_with_spectrum(eigenvalues, &mut rng)
                    }
                };
                Ok(Box::new(QuadraticSaddle::new(h, *noise_std)?))
            }
            ProblemConfig::LinearRegression {
                dim,
                spectrum,
                x_star,
                rotate_seed,
            } => {
                if *dim == 0 {
                    return Err(Error::config("dim", "must be positive"));
                }
                let a = psd_from_spectrum(*dim, *dim, spectrum, *rotate_seed)?;
                let xs = match x_star {
                    XStar::Zero => DVector::zeros(*dim),
                    XStar::Random { seed, norm } => {
                        let mut rng = aux_stream(*seed, 0x357A);
                        let mut v = standard_normal_vec(*dim, &mut rng);
                        let n = v.norm();
                        if n > 0.0 {
                            v *= norm / n;
                        }
                        v
                    }
                };
                Ok(Box::new(LinearRegressionProblem::new(a, xs)?))
            }
            ProblemConfig::MatrixFactorization {
                m,
                r,
                spectrum,
                rotate_seed,
            } => {
                check_factor_shape(*m, *r)?;
                let big_m = psd_from_spectrum(*m, *r, spectrum, *rotate_seed)?;
                Ok(Box::new(MatrixFactorizationProblem::new(big_m, *r)?))
            }
            ProblemConfig::OnlinePca {
                dim,
                r,
                spectrum,
                rotate_seed,
            } => {
                check_factor_shape(*dim, *r)?;
                let big_m = psd_from_spectrum(*dim, *dim, spectrum, *rotate_seed)?;
                Ok(Box::new(OnlinePcaProblem::new(big_m, *r)?))
            }
        }
    }
}

fn check_factor_shape(m: usize, r: usize) -> Result<()> {
    if m == 0 || r == 0 || r > m {
        return Err(Error::config(
            "shape",
            format!("need 1 <= r <= m, got m={m}, r={r}"),
        ));
    }
    Ok(())
}

/// Central finite-difference gradient of the loss, the oracle used by the
/// consistency tests. Step `h = 1e-5 * (1 + |x|)`.
pub fn finite_diff_grad(p: &dyn Problem, x: &DVector<f64>) -> Result<DVector<f64>> {
    let h = 1e-5 * (1.0 + x.norm());
    let mut out = DVector::zeros(p.dim());
    let mut xp = x.clone();
    let mut xm = x.clone();
    for i in 0..p.dim() {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        out[i] = (p.loss(&xp)? - p.loss(&xm)?) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    Ok(out)
}

/// Central finite-difference Hessian built from gradient evaluations,
/// symmetrized.
pub fn finite_diff_hessian(p: &dyn Problem, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let h = 1e-5 * (1.0 + x.norm());
    let d = p.dim();
    let mut out = DMatrix::zeros(d, d);
    let mut xp = x.clone();
    let mut xm = x.clone();
    for j in 0..d {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        let gp = p.grad(&xp)?;
        let gm = p.grad(&xm)?;
        for i in 0..d {
            out[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    Ok(0.5 * (&out + out.transpose()))
}

/// Gaussian sample with covariance `M` given the factor `sqrt_m` where
/// `M = sqrt_m * sqrt_m^T`.
pub(crate) fn gaussian_with_cov(sqrt_m: &DMatrix<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
    sqrt_m * standard_normal_vec(sqrt_m.ncols(), rng)
}

/// Symmetric square root of a PSD matrix via eigendecomposition.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = linalg::sym_eigen(m);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| v.max(0.0).sqrt()),
    ));
    &vecs * d * vecs.transpose()
}

pub(crate) fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
