//! Assumption-constant bundles: analytic values per problem family and
//! Monte Carlo estimators that the analytic bundle must dominate.
//!
//! The analytic formulas carry an unspecified universal constant on the
//! noise-moment bounds. It is calibrated once per problem family at a
//! reference size as the smallest power of two under which the analytic
//! value dominates the empirical estimate (see [`CalibratedC::calibrate`]);
//! the shipped defaults in [`CalibratedC::family_default`] were produced by
//! exactly that procedure.

use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    Empirical,
}

/// The assumption constants for a problem over its Gamma-region.
///
/// `c0` bounds the loss over the region (the global statements assume a
/// bounded objective; the suite problems are unbounded, so the region bound
/// is what enters the calculators). The empirical estimator does not
/// estimate the coercivity pair `c7`/`d7`; those fields are zero with
/// empirical provenance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstantBundle {
    pub provenance: Provenance,
    /// Iterate-norm bound Gamma the constants are valid under.
    pub gamma: f64,
    pub c2: f64,
    pub c3: f64,
    pub c0: f64,
    pub b1: f64,
    pub b2: f64,
    pub d4: f64,
    pub c7: f64,
    pub d7: f64,
}

impl ConstantBundle {
    /// Checks the structural assumptions (`B2 >= 1`, `C3 >= C2`,
    /// `D4 <= d * C2`) and returns the violated ones by name. The online-PCA
    /// analytic bundle legitimately reports `C3 < C2` (its Hessian-Lipschitz
    /// constant is the bare third-derivative bound), so violations are
    /// reported rather than rejected.
    pub fn assumption_violations(&self, dim: usize) -> Vec<String> {
        let mut v = Vec::new();
        if self.b2 < 1.0 {
            v.push(format!("B2 = {} < 1", self.b2));
        }
        if self.c3 < self.c2 {
            v.push(format!("C3 = {} < C2 = {}", self.c3, self.c2));
        }
        if self.d4 > dim as f64 * self.c2 + 1e-12 {
            v.push(format!("D4 = {} > d*C2 = {}", self.d4, dim as f64 * self.c2));
        }
        v
    }
}

/// Family calibration of the universal constant carried by the closed-form
/// noise bounds, one factor per moment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibratedC {
    pub b1: f64,
    pub b2: f64,
}

impl CalibratedC {
    pub const UNIT: CalibratedC = CalibratedC { b1: 1.0, b2: 1.0 };

    /// Stored calibration per problem family: the smallest powers of two
    /// dominating the empirical estimates across the reference instances
    /// (linear regression d=3 flat and d=8 decay(2); factorization m in
    /// {4, 6}, r=2, spectrum {1, 1/2}; PCA d in {4, 6}, r=2, decay(1); all
    /// at Gamma = 2 with 2e4 draws over 10 points).
    pub fn family_default(problem_name: &str) -> CalibratedC {
        match problem_name {
            "linear_regression" => CalibratedC { b1: 0.5, b2: 2.0 },
            "matrix_factorization" => CalibratedC { b1: 8.0, b2: 8.0 },
            "online_pca" => CalibratedC { b1: 2.0, b2: 4.0 },
            _ => CalibratedC::UNIT,
        }
    }

    /// Smallest power-of-two factors making the analytic noise bounds
    /// dominate a fresh empirical estimate on `problem`.
    pub fn calibrate(
        problem: &dyn Problem,
        gamma: f64,
        samples: u64,
        points: u64,
        rng: &mut dyn RngCore,
    ) -> Result<CalibratedC> {
        let unit = problem.analytic_constants(gamma, &CalibratedC::UNIT)?;
        let emp = empirical_constants(problem, samples, points, gamma, rng)?;
        let pow2_at_least = |x: f64| -> f64 {
            if x <= 0.0 {
                return 1.0;
            }
            2.0f64.powf(x.log2().ceil())
        };
        Ok(CalibratedC {
            b1: pow2_at_least(emp.bundle.b1 / unit.b1),
            b2: pow2_at_least(emp.bundle.b2 / unit.b2),
        })
    }
}

/// Empirical bundle plus the Monte Carlo standard errors of the
/// noise-moment estimates (taken at the maximizing evaluation point).
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalConstants {
    pub bundle: ConstantBundle,
    pub b1_std_error: f64,
    pub b2_std_error: f64,
    pub samples: u64,
    pub points: u64,
}

/// Monte Carlo estimation of the assumption constants over random points of
/// the Gamma-region: `C2` and `D4` from exact Hessians, `B1`/`B2` from
/// `samples` noise draws per point, `C3` from Hessian difference quotients
/// over random pairs.
pub fn empirical_constants(
    problem: &dyn Problem,
    samples: u64,
    points: u64,
    gamma: f64,
    rng: &mut dyn RngCore,
) -> Result<EmpiricalConstants> {
    if points == 0 || samples == 0 {
        return Err(Error::InvalidParameter(
            "samples and points must be >= 1".into(),
        ));
    }
    let dim = problem.dim();
    let mut c2 = 0.0f64;
    let mut d4 = 0.0f64;
    let mut c0 = 0.0f64;
    let mut b1 = f64::NEG_INFINITY;
    let mut b2 = f64::NEG_INFINITY;
    let mut b1_se = 0.0;
    let mut b2_se = 0.0;

    let mut xi = DVector::zeros(dim);
    let mut grad = DVector::zeros(dim);
    for _ in 0..points {
        let x = problem.sample_in_gamma_ball(gamma, rng);
        let hess = problem.hessian(&x)?;
        let eigs = linalg::sym_eigenvalues(&hess);
        c2 = c2.max(eigs.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        d4 = d4.max(eigs.iter().filter(|v| **v > 0.0).sum());
        c0 = c0.max(problem.loss(&x)?.abs());
        problem.grad_into(&x, &mut grad)?;

        // one pass of noise draws: quadratic form, second and fourth moments
        let mut sum_q = 0.0;
        let mut sum_q_sq = 0.0;
        let mut sum_2 = 0.0;
        let mut sum_4 = 0.0;
        let mut sum_8 = 0.0;
        for _ in 0..samples {
            problem.sample_grad_into(&x, &mut xi, rng)?;
            xi -= &grad;
            let norm_sq = xi.norm_squared();
            let q = xi.dot(&(&hess * &xi));
            sum_q += q;
            sum_q_sq += q * q;
            sum_2 += norm_sq;
            sum_4 += norm_sq * norm_sq;
            sum_8 += norm_sq * norm_sq * norm_sq * norm_sq;
        }
        let n = samples as f64;
        let mean_q = sum_q / n;
        let se_q = ((sum_q_sq / n - mean_q * mean_q).max(0.0) / n).sqrt();
        if mean_q > b1 {
            b1 = mean_q;
            b1_se = se_q;
        }
        let mean_2 = sum_2 / n;
        let mean_4 = sum_4 / n;
        let se_2 = ((sum_4 / n - mean_2 * mean_2).max(0.0) / n).sqrt();
        let se_4 = ((sum_8 / n - mean_4 * mean_4).max(0.0) / n).sqrt();
        let root4 = mean_4.sqrt();
        let (cand, cand_se) = if root4 >= mean_2 {
            // delta-method standard error of sqrt(mean_4)
            (root4, se_4 / (2.0 * root4.max(1e-300)))
        } else {
            (mean_2, se_2)
        };
        if cand > b2 {
            b2 = cand;
            b2_se = cand_se;
        }
    }

    // Hessian-Lipschitz difference quotients over random pairs.
    let mut c3 = 0.0f64;
    for _ in 0..1000 {
        let x = problem.sample_in_gamma_ball(gamma, rng);
        let y = problem.sample_in_gamma_ball(gamma, rng);
        let dist = (&x - &y).norm();
        if dist < 1e-9 {
            continue;
        }
        let diff = problem.hessian(&x)? - problem.hessian(&y)?;
        c3 = c3.max(linalg::sym_opnorm(&diff) / dist);
    }

    Ok(EmpiricalConstants {
        bundle: ConstantBundle {
            provenance: Provenance::Empirical,
            gamma,
            c2,
            c3,
            c0,
            b1: b1.max(0.0),
            b2: b2.max(0.0),
            d4,
            c7: 0.0,
            d7: 0.0,
        },
        b1_std_error: b1_se,
        b2_std_error: b2_se,
        samples,
        points,
    })
}

/// Per-constant dominance verdict: the empirical estimate (minus a 3-sigma
/// Monte Carlo allowance where one applies) must not exceed the analytic
/// value.
#[derive(Debug, Clone, Serialize)]
pub struct DominanceRow {
    pub name: &'static str,
    pub empirical: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    pub rows: Vec<DominanceRow>,
}

impl DominanceReport {
    pub fn all_dominated(&self) -> bool {
        self.rows.iter().all(|r| r.dominated)
    }
}

pub fn dominance_report(
    empirical: &EmpiricalConstants,
    analytic: &ConstantBundle,
) -> DominanceReport {
    let e = &empirical.bundle;
    let row = |name, emp: f64, se: f64, ana: f64| DominanceRow {
        name,
        empirical: emp,
        std_error: se,
        analytic: ana,
        dominated: emp - 3.0 * se <= ana * (1.0 + 1e-12) + 1e-12,
    };
    DominanceReport {
        rows: vec![
            row("C2", e.c2, 0.0, analytic.c2),
            row("C3", e.c3, 0.0, analytic.c3),
            row("D4", e.d4, 0.0, analytic.d4),
            row("B1", e.b1, empirical.b1_std_error, analytic.b1),
            row("B2", e.b2, empirical.b2_std_error, analytic.b2),
            row("C0", e.c0, 0.0, analytic.c0),
        ],
    }
}

/// Coercivity spot check at `points` random locations with norms in
/// `[radius, 2 radius]`: both growth inequalities
/// `|grad F|^2 >= c7 F - D7` and `|x| <= c7 F + D7` must hold.
pub fn coercivity_spot_check(
    problem: &dyn Problem,
    c7: f64,
    d7: f64,
    radius: f64,
    points: u64,
    rng: &mut dyn RngCore,
) -> Result<u64> {
    let mut violations = 0;
    for _ in 0..points {
        let mut x = crate::problems::uniform_ball(problem.dim(), 1.0, rng);
        let norm = x.norm();
        if norm < 1e-12 {
            continue;
        }
        let target: f64 = radius * (1.0 + rand::Rng::gen::<f64>(rng));
        x *= target / norm;
        let f = problem.loss(&x)?;
        let g = problem.grad(&x)?.norm_squared();
        if g < c7 * f - d7 - 1e-9 {
            violations += 1;
        }
        if x.norm() > c7 * f + d7 + 1e-9 {
            violations += 1;
        }
    }
    Ok(violations)
}
