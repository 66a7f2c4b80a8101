//! Closed-form calculators for the hitting-time and ergodicity
//! prescriptions, plus numerical validators for the matrix-product
//! inequalities and the continuous-time escape formulas.
//!
//! The absolute constants the statements leave unspecified (`C_alpha` and
//! the multiplier inside `C_6`) are exposed as inputs defaulting to 1, so
//! downstream experiments check scaling rather than absolute counts.

mod matrix_bounds;
mod ou;
mod variance;

pub use matrix_bounds::{check_matrix_product_bounds, ClaimCheck, MatrixBoundsReport};
pub use ou::{ou_endpoint_std_devs, ou_expected_loss, ou_sample_endpoint};
pub use variance::{variance_recursion, variance_recursion_checkpoints};

use nalgebra::DVector;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs for the first-order hitting-time prescription.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FospBoundInputs {
    /// Loss at the initial iterate, `F(X_0)`.
    pub f0: f64,
    /// Hessian spectral-norm bound.
    pub c2: f64,
    /// Noise quadratic-form bound `E xi^T hess F xi <= B_1`.
    pub b1: f64,
    pub eta0: f64,
    pub alpha: f64,
    /// Target gradient accuracy.
    pub eps: f64,
    /// Failure probability in (0, 1).
    pub rho: f64,
    pub dim: usize,
    /// Unspecified absolute constant; defaults to 1.
    pub c_alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FospBound {
    /// Largest admissible volatility: `eps sqrt(rho) / (2 sqrt(3 d C2))`.
    pub delta0_max: f64,
    /// Largest admissible initial step: `1/(6 C2)`, additionally
    /// `eps^2 rho / (24 B1 C2)` in the constant-step regime.
    pub eta0_max: f64,
    /// Iteration bound `N` for the given `eta0`, by decay regime.
    pub n_bound: f64,
}

impl FospBound {
    pub fn n_iters(&self) -> u64 {
        if self.n_bound >= u64::MAX as f64 {
            u64::MAX
        } else {
            self.n_bound.ceil() as u64
        }
    }
}

fn require_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

/// Hyper-parameter prescription for hitting a first-order stationary point
/// with probability at least `1 - rho`.
pub fn fosp_bound(inputs: &FospBoundInputs) -> Result<FospBound> {
    let FospBoundInputs {
        f0,
        c2,
        b1,
        eta0,
        alpha,
        eps,
        rho,
        dim,
        c_alpha,
    } = *inputs;
    require_positive(f0, "f0")?;
    require_positive(c2, "c2")?;
    require_positive(b1, "b1")?;
    require_positive(eta0, "eta0")?;
    require_positive(eps, "eps")?;
    require_positive(c_alpha, "c_alpha")?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in (0, 1), got {rho}"
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    let d = dim as f64;
    let delta0_max = eps * rho.sqrt() / (2.0 * (3.0 * d * c2).sqrt());
    let mut eta0_max = 1.0 / (6.0 * c2);
    if alpha == 0.0 {
        eta0_max = eta0_max.min(eps * eps * rho / (24.0 * b1 * c2));
    }
    let n_bound = if alpha == 0.0 {
        8.0 * f0 / (eps * eps * rho * eta0)
    } else if alpha < 0.5 {
        let first = (f0 / (rho * eta0 * eps * eps)).powf(1.0 / (1.0 - alpha));
        let second = (b1 * c2 * eta0 / (rho * eps * eps)).powf(1.0 / alpha);
        c_alpha * first.max(second)
    } else {
        c_alpha
            * ((f0 + b1 * c2 * eta0 * eta0) / (rho * eta0 * eps * eps)).powf(1.0 / (1.0 - alpha))
    };
    Ok(FospBound {
        delta0_max,
        eta0_max,
        n_bound,
    })
}

/// Escape-window width `D_5 = (2 / lambda_H) log((16 D_4 + 40) / lambda_H)`.
/// The stepper should accumulate between `2 D_5` and `3 D_5` of step mass.
/// Degenerate when the log argument is at most 1.
pub fn escape_window(lambda_h: f64, d4: f64) -> Result<f64> {
    require_positive(lambda_h, "lambda_h")?;
    if d4 < 0.0 {
        return Err(Error::InvalidParameter("d4 must be nonnegative".into()));
    }
    let ratio = (16.0 * d4 + 40.0) / lambda_h;
    if ratio <= 1.0 {
        return Err(Error::DegenerateWindow { ratio });
    }
    Ok(2.0 / lambda_h * ratio.ln())
}

/// Inputs for the second-order hitting-time prescription.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SospBoundInputs {
    /// Global loss bound `|F| <= C_0`.
    pub c0: f64,
    /// Hessian Lipschitz constant.
    pub c3: f64,
    /// Positive-eigenvalue-sum bound.
    pub d4: f64,
    /// Fourth-moment noise bound.
    pub b2: f64,
    /// Hessian tolerance of the target region.
    pub lambda_eps: f64,
    /// Free window parameter `q > 0`.
    pub q: f64,
    pub eps: f64,
    pub rho: f64,
    pub dim: usize,
    pub eta0: f64,
    pub alpha: f64,
    pub c_alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SospBound {
    /// Escape-window mass `Q = 2 lambda_eps^-1 log((16 D4 + 40)/lambda_eps)`.
    pub q_mass: f64,
    /// `C_6 = max{q^-1.5 C3, lambda_eps^-1, 1, Q}` with unit constant.
    pub c6: f64,
    /// Prescribed volatility.
    pub delta0: f64,
    /// Largest admissible initial step.
    pub eta0_max: f64,
    /// Effective accuracy `eps_0`.
    pub eps0: f64,
    /// Iteration bound for the given `eta0`.
    pub n_bound: f64,
}

impl SospBound {
    pub fn n_iters(&self) -> u64 {
        if self.n_bound >= u64::MAX as f64 {
            u64::MAX
        } else {
            self.n_bound.ceil() as u64
        }
    }
}

/// Hyper-parameter prescription for hitting a second-order stationary point.
pub fn sosp_bound(inputs: &SospBoundInputs) -> Result<SospBound> {
    let SospBoundInputs {
        c0,
        c3,
        d4,
        b2,
        lambda_eps,
        q,
        eps,
        rho,
        dim,
        eta0,
        alpha,
        c_alpha,
    } = *inputs;
    for (v, name) in [
        (c0, "c0"),
        (c3, "c3"),
        (b2, "b2"),
        (lambda_eps, "lambda_eps"),
        (q, "q"),
        (eps, "eps"),
        (eta0, "eta0"),
        (c_alpha, "c_alpha"),
    ] {
        require_positive(v, name)?;
    }
    if d4 < 0.0 {
        return Err(Error::InvalidParameter("d4 must be nonnegative".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in (0, 1), got {rho}"
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    let spread = 16.0 * d4 + 40.0;
    let ratio = spread / lambda_eps;
    if ratio <= 1.0 {
        return Err(Error::NonPositiveLog {
            context: "sosp_bound Q".into(),
            value: ratio,
        });
    }
    let q_mass = 2.0 / lambda_eps * ratio.ln();
    let c6 = (q.powf(-1.5) * c3)
        .max(1.0 / lambda_eps)
        .max(1.0)
        .max(q_mass);
    let d = dim as f64;
    let delta0 = d.powf(-1.5) * c6.powf(-3.5) * ratio.powf(-(9.0 + 18.0 * q));
    let step_ratio = spread / c3;
    if step_ratio <= 1.0 {
        return Err(Error::NonPositiveLog {
            context: "sosp_bound eta0 cap".into(),
            value: step_ratio,
        });
    }
    let eta0_max = (delta0 * delta0 / b2).min(step_ratio.ln() / c3);
    let eps0 = 0.5 * eps.min(delta0 * lambda_eps.min(1.0).min(1.0 / q_mass).sqrt());
    let n_bound = c_alpha
        * (2.0 * c0 / (rho * eta0 * eps0 * eps0) + q_mass / (eta0 * rho))
            .powf(1.0 / (1.0 - alpha));
    Ok(SospBound {
        q_mass,
        c6,
        delta0,
        eta0_max,
        eps0,
        n_bound,
    })
}

/// Inputs for the ergodicity constant chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErgodicBoundInputs {
    pub c7: f64,
    pub d7: f64,
    pub b1: f64,
    pub b2: f64,
    pub dim: usize,
    pub delta0: f64,
    pub eta0: f64,
    pub alpha: f64,
    /// Target point of the epsilon-ball.
    pub z0: Vec<f64>,
    pub eps: f64,
    /// Failure probability in (0, 1).
    pub p0: f64,
    /// Loss level at the first slow-step iterate (callers typically pass
    /// `F(X_0)`, an upper surrogate for `E F(X_{n_0})`).
    pub f_at_n0: f64,
    /// Gradient-norm bound `max{|grad F(x)| : |x| <= 4 D_X}`; when absent it
    /// must be derivable from a problem-specific bound by the caller.
    pub d_f: Option<f64>,
}

/// Monte Carlo estimate of the reachability probability `c_alpha`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CAlphaEstimate {
    pub estimate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub draws: u64,
    /// True when no draw landed in the ball: `estimate` is then 0 and
    /// `ci_upper` is the rule-of-three certified upper bound.
    pub upper_bound_only: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicConstants {
    pub m_v: f64,
    pub d_x: f64,
    pub d_f: f64,
    pub eps0: f64,
    pub n0: f64,
    /// Recurrence trials `K` before the sub-level set is reached.
    pub k_trials: f64,
    /// Bernoulli trials `J` (infinite when `c_alpha` is indistinguishable
    /// from zero).
    pub j_trials: f64,
    pub c_alpha: CAlphaEstimate,
    /// Iteration bound; a lower bound only when `n_is_lower_bound_only`.
    pub n_bound: f64,
    pub n_is_lower_bound_only: bool,
}

/// Default Monte Carlo sample count for the `c_alpha` ball probability.
pub const C_ALPHA_DRAWS: u64 = 10_000_000;

/// The ergodicity constant chain
/// `M_V -> D_X -> D_F -> eps_0 -> n_0 -> c_alpha -> N`.
///
/// `c_alpha = P(|Z - (2 D_X/(delta0 sqrt(eps0))) e_1| <= eps0/(delta0 sqrt(2 eps0))) / 4`
/// is estimated by Monte Carlo over the noncentral chi-square tail with a
/// two-sided binomial confidence interval; a zero count returns the
/// rule-of-three upper bound and flags `N` as a lower bound only.
pub fn ergodic_constants(
    inputs: &ErgodicBoundInputs,
    draws: u64,
    rng: &mut dyn RngCore,
) -> Result<ErgodicConstants> {
    let ErgodicBoundInputs {
        c7,
        d7,
        b1,
        b2,
        dim,
        delta0,
        eta0,
        alpha,
        ref z0,
        eps,
        p0,
        f_at_n0,
        d_f,
    } = *inputs;
    require_positive(c7, "c7")?;
    require_positive(delta0, "delta0")?;
    require_positive(eta0, "eta0")?;
    require_positive(eps, "eps")?;
    if d7 < 0.0 || b1 < 0.0 || b2 < 0.0 {
        return Err(Error::InvalidParameter(
            "d7, b1, b2 must be nonnegative".into(),
        ));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p0 must lie in (0, 1), got {p0}"
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    let d = dim as f64;
    let z0_norm = DVector::from_row_slice(z0).norm();

    let m_v = 8.0 / c7 * (d7 + 6.0 * b1 + 6.0 * d * delta0 * delta0);
    let d_x = (d7 + c7 * m_v).max(z0_norm).max(1.0);
    let d_f = match d_f {
        Some(v) => v,
        None => {
            return Err(Error::InvalidParameter(
                "d_f must be supplied (or derived from a problem gradient bound over |x| <= 4 D_X)"
                    .into(),
            ))
        }
    };
    let eps0 = (eps / (2.0 * d_f + 2.0 * b2.sqrt() + 1.0)).min(d_f / d_x);

    // n0 = min{t : eta_t <= eps0}
    let n0 = if eta0 <= eps0 {
        1.0
    } else if alpha == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "constant steps never reach eta <= eps0 = {eps0} < eta0 = {eta0}; ergodicity needs alpha > 0"
        )));
    } else {
        (eta0 / eps0).powf(1.0 / alpha).ceil()
    };

    let center = 2.0 * d_x / (delta0 * eps0.sqrt());
    let radius = eps0 / (delta0 * (2.0 * eps0).sqrt());
    let c_alpha = shifted_ball_prob_mc(center, radius, dim, draws, rng);
    let c_alpha = CAlphaEstimate {
        estimate: 0.25 * c_alpha.estimate,
        ci_lower: 0.25 * c_alpha.ci_lower,
        ci_upper: 0.25 * c_alpha.ci_upper,
        draws: c_alpha.draws,
        upper_bound_only: c_alpha.upper_bound_only,
    };

    let k_trials = (2.0 * (f_at_n0 / (0.5 * m_v)).max(1.0).ln() / (c7 * eps0)).ceil();
    let (j_trials, n_is_lower_bound_only, c_for_j) = if c_alpha.upper_bound_only {
        (f64::INFINITY, true, c_alpha.ci_upper)
    } else {
        (
            ((0.5 * p0).ln() / (1.0 - c_alpha.estimate).ln()).ceil(),
            false,
            c_alpha.estimate,
        )
    };
    let j_for_n = ((0.5 * p0).ln() / (1.0 - c_for_j).ln()).ceil();
    let n_bound = n0
        + ((k_trials + j_for_n * (1.0 + 8.0 / (c7 * eps0))) / (4.0 * delta0 * p0 * eta0))
            .powf(1.0 / (1.0 - alpha));

    Ok(ErgodicConstants {
        m_v,
        d_x,
        d_f,
        eps0,
        n0,
        k_trials,
        j_trials,
        c_alpha,
        n_bound,
        n_is_lower_bound_only,
    })
}

/// Monte Carlo estimate of `P(|Z - center e_1| <= radius)` for
/// `Z ~ N(0, I_d)`, with a two-sided 95% binomial interval (rule-of-three
/// upper bound when the count is zero).
pub fn shifted_ball_prob_mc(
    center: f64,
    radius: f64,
    dim: usize,
    draws: u64,
    rng: &mut dyn RngCore,
) -> CAlphaEstimate {
    let r_sq = radius * radius;
    let mut hits = 0u64;
    for _ in 0..draws {
        let z1: f64 = StandardNormal.sample(rng);
        let mut dist_sq = (z1 - center) * (z1 - center);
        for _ in 1..dim {
            let z: f64 = StandardNormal.sample(rng);
            dist_sq += z * z;
        }
        if dist_sq <= r_sq {
            hits += 1;
        }
    }
    let n = draws as f64;
    if hits == 0 {
        return CAlphaEstimate {
            estimate: 0.0,
            ci_lower: 0.0,
            ci_upper: 3.0 / n,
            draws,
            upper_bound_only: true,
        };
    }
    let p = hits as f64 / n;
    let half = 1.959964 * (p * (1.0 - p) / n).sqrt();
    CAlphaEstimate {
        estimate: p,
        ci_lower: (p - half).max(0.0),
        ci_upper: (p + half).min(1.0),
        draws,
        upper_bound_only: false,
    }
}

/// `P(|Z - center| <= radius)` for scalar standard normal `Z`, the exact
/// 1-d ball probability used to cross-check the Monte Carlo route.
pub fn shifted_interval_prob(center: f64, radius: f64) -> f64 {
    normal_cdf(center + radius) - normal_cdf(center - radius)
}

/// Standard normal CDF via an erfc rational approximation (absolute error
/// below 1.2e-7, far inside the Monte Carlo noise it is compared against).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc_approx(-x / std::f64::consts::SQRT_2)
}

fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::aux_stream;
    use approx::assert_relative_eq;

    #[test]
    fn fosp_constant_step_example() {
        // alpha = 0, F0 = 1, eps = 0.1, rho = 0.1, C2 = 1, B1 = 1.
        let mut inputs = FospBoundInputs {
            f0: 1.0,
            c2: 1.0,
            b1: 1.0,
            eta0: 1.0, // replaced below
            alpha: 0.0,
            eps: 0.1,
            rho: 0.1,
            dim: 1,
            c_alpha: 1.0,
        };
        let caps = fosp_bound(&inputs).unwrap();
        // eta0_max = min(1/6, eps^2 rho / 24) = 0.001/24 = 1/24000
        assert_relative_eq!(caps.eta0_max, 1.0 / 24_000.0, max_relative = 1e-12);
        inputs.eta0 = caps.eta0_max;
        let bound = fosp_bound(&inputs).unwrap();
        // N = 8 F0 / (eps^2 rho eta0) = 8 * 24000 / 0.001 = 1.92e8
        assert_relative_eq!(bound.n_bound, 1.92e8, max_relative = 1e-10);
    }

    #[test]
    fn fosp_delta0_cap_example() {
        // d = 4, eps = 0.2, rho = 0.25, C2 = 3 -> 0.2 * 0.5 / (2 sqrt(36)) = 0.1/12
        let inputs = FospBoundInputs {
            f0: 1.0,
            c2: 3.0,
            b1: 1.0,
            eta0: 0.01,
            alpha: 0.3,
            eps: 0.2,
            rho: 0.25,
            dim: 4,
            c_alpha: 1.0,
        };
        let bound = fosp_bound(&inputs).unwrap();
        assert_relative_eq!(bound.delta0_max, 0.1 / 12.0, max_relative = 1e-12);
    }

    #[test]
    fn fosp_middle_regime_branches_coincide() {
        // At alpha = 1/2 the two arguments of the middle-regime max coincide
        // exactly when eta0^2 = F0 / (B1 C2).
        let f0 = 2.0f64;
        let b1 = 5.0;
        let c2 = 3.0;
        let eta0 = (f0 / (b1 * c2)).sqrt();
        let (rho, eps) = (0.2, 0.1);
        let first = f0 / (rho * eta0 * eps * eps);
        let second = b1 * c2 * eta0 / (rho * eps * eps);
        assert_relative_eq!(first, second, max_relative = 1e-12);
    }

    #[test]
    fn fosp_monotonicity() {
        let base = FospBoundInputs {
            f0: 1.0,
            c2: 2.0,
            b1: 3.0,
            eta0: 1e-4,
            alpha: 0.0,
            eps: 0.1,
            rho: 0.2,
            dim: 5,
            c_alpha: 1.0,
        };
        let n = |inp: &FospBoundInputs| fosp_bound(inp).unwrap().n_bound;
        for alpha in [0.0, 0.3, 0.5, 0.8] {
            let mut a = base;
            a.alpha = alpha;
            // strictly decreasing in eps
            let mut b = a;
            b.eps = a.eps * 1.5;
            assert!(n(&b) < n(&a));
            // strictly decreasing in rho
            let mut c = a;
            c.rho = a.rho * 1.5;
            assert!(n(&c) < n(&a));
            // strictly increasing in F0
            let mut d = a;
            d.f0 = a.f0 * 1.5;
            assert!(n(&d) > n(&a));
        }
    }

    #[test]
    fn escape_window_values() {
        // lambda_H = 1, D4 = 1 -> 2 ln 56
        let d5 = escape_window(1.0, 1.0).unwrap();
        assert_relative_eq!(d5, 2.0 * 56.0f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(d5, 8.0507033814703, max_relative = 1e-12);
        // lambda_H = 0.5, D4 = 10 -> 4 ln 400 = 23.9658...
        let d5 = escape_window(0.5, 10.0).unwrap();
        assert_relative_eq!(d5, 4.0 * 400.0f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(d5, 23.965858188431927, max_relative = 1e-12);
    }

    #[test]
    fn escape_window_degenerate_boundary() {
        // lambda_H = 56, D4 = 1: log argument exactly 1 -> degenerate.
        assert!(matches!(
            escape_window(56.0, 1.0),
            Err(Error::DegenerateWindow { .. })
        ));
        assert!(escape_window(100.0, 1.0).is_err());
    }

    #[test]
    fn sosp_bound_arithmetic_chain() {
        // d=2, q=1, C3=1, lambda_eps=1, D4=1, C0=1, B2=1, eps=0.1:
        // Q = 2 ln 56, C6 = Q, delta0 = 2^-1.5 Q^-3.5 56^-27.
        let inputs = SospBoundInputs {
            c0: 1.0,
            c3: 1.0,
            d4: 1.0,
            b2: 1.0,
            lambda_eps: 1.0,
            q: 1.0,
            eps: 0.1,
            rho: 0.1,
            dim: 2,
            eta0: 1e-3,
            alpha: 0.0,
            c_alpha: 1.0,
        };
        let bound = sosp_bound(&inputs).unwrap();
        let q_mass = 2.0 * 56.0f64.ln();
        assert_relative_eq!(bound.q_mass, q_mass, max_relative = 1e-13);
        assert_relative_eq!(bound.c6, q_mass, max_relative = 1e-13);
        // Independent log-space evaluation of the delta0 chain.
        let ln_delta0 = -1.5 * 2.0f64.ln() - 3.5 * q_mass.ln() - 27.0 * 56.0f64.ln();
        assert_relative_eq!(bound.delta0, ln_delta0.exp(), max_relative = 1e-10);
        // eps very large: the delta0 branch of eps0 binds.
        let mut wide = inputs;
        wide.eps = 1e9;
        let wide_bound = sosp_bound(&wide).unwrap();
        let expected =
            0.5 * wide_bound.delta0 * (1.0f64).min(1.0 / wide_bound.q_mass).sqrt();
        assert_relative_eq!(wide_bound.eps0, expected, max_relative = 1e-12);
    }

    #[test]
    fn sosp_q_decreases_in_lambda_eps() {
        let mk = |lambda_eps: f64| SospBoundInputs {
            c0: 1.0,
            c3: 1.0,
            d4: 1.0,
            b2: 1.0,
            lambda_eps,
            q: 1.0,
            eps: 0.1,
            rho: 0.1,
            dim: 2,
            eta0: 1e-3,
            alpha: 0.0,
            c_alpha: 1.0,
        };
        let mut prev = f64::INFINITY;
        for le in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let q = sosp_bound(&mk(le)).unwrap().q_mass;
            assert!(q < prev, "Q must strictly decrease in lambda_eps");
            prev = q;
        }
    }

    #[test]
    fn ergodic_mv_example() {
        // c7=1, D7=0, B1=0, d=1, delta0=1 -> M_V = 8 * 6 = 48.
        let inputs = ErgodicBoundInputs {
            c7: 1.0,
            d7: 0.0,
            b1: 0.0,
            b2: 1.0,
            dim: 1,
            delta0: 1.0,
            eta0: 1.0,
            alpha: 0.6,
            z0: vec![0.0],
            eps: 0.5,
            p0: 0.1,
            f_at_n0: 10.0,
            d_f: Some(4.0),
        };
        let mut rng = aux_stream(1, 2);
        let consts = ergodic_constants(&inputs, 10_000, &mut rng).unwrap();
        assert_relative_eq!(consts.m_v, 48.0, max_relative = 1e-14);
        assert!(consts.d_x >= 48.0);
    }

    #[test]
    fn ergodic_n_decreases_as_p0_grows() {
        let mk = |p0: f64| ErgodicBoundInputs {
            c7: 2.0,
            d7: 0.5,
            b1: 0.1,
            b2: 1.0,
            dim: 1,
            delta0: 1.0,
            eta0: 1.0,
            alpha: 0.6,
            z0: vec![0.3],
            eps: 2.0,
            p0,
            f_at_n0: 5.0,
            d_f: Some(3.0),
        };
        let mut prev = f64::INFINITY;
        for p0 in [0.1, 0.3, 0.6, 0.9, 0.99] {
            let mut rng = aux_stream(9, 0);
            let consts = ergodic_constants(&mk(p0), 200_000, &mut rng).unwrap();
            assert!(
                consts.n_bound <= prev,
                "N must not increase as p0 -> 1 (p0={p0})"
            );
            prev = consts.n_bound;
        }
    }

    #[test]
    fn ball_prob_matches_erf_in_1d() {
        // Centered and shifted 1-d balls against the closed form.
        let mut rng = aux_stream(4, 7);
        for (center, radius) in [(0.0, 1.0), (0.5, 0.7), (2.0, 0.5)] {
            let exact = shifted_interval_prob(center, radius);
            let mc = shifted_ball_prob_mc(center, radius, 1, 2_000_000, &mut rng);
            let se = (exact * (1.0 - exact) / 2_000_000.0).sqrt();
            assert!(
                (mc.estimate - exact).abs() < 4.0 * se + 1e-6,
                "center={center} radius={radius}: mc={} exact={exact}",
                mc.estimate
            );
        }
    }

    #[test]
    fn ball_prob_zero_hits_gives_upper_bound() {
        let mut rng = aux_stream(4, 8);
        let far = shifted_ball_prob_mc(40.0, 0.5, 3, 10_000, &mut rng);
        assert!(far.upper_bound_only);
        assert_eq!(far.estimate, 0.0);
        assert_relative_eq!(far.ci_upper, 3.0 / 10_000.0, max_relative = 1e-12);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-6);
        assert!((normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        assert!((normal_cdf(-1.0) - 0.15865525).abs() < 1e-6);
    }
}
