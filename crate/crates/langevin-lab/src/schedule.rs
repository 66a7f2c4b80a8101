//! Power-law step-size schedules `eta_n = eta0 * n^(-alpha)` and their
//! cumulative quantities.
//!
//! Partial sums are computed by direct summation rather than closed-form
//! approximation so that bound checks reproduce bit-exactly; a prefix cache
//! supports repeated queries up to a run budget. Iterations are 1-indexed:
//! the first step applied to the initial point `X_0` has size `eta_1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size schedule `eta_n = eta0 * n^(-alpha)` with `alpha` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub eta0: f64,
    pub alpha: f64,
}

/// Exact sums of `eta_i` and `eta_i^2` over an inclusive index window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSums {
    pub lo: u64,
    pub hi: u64,
    pub sum_eta: f64,
    pub sum_eta_sq: f64,
}

/// Relative slack used when testing whether an accumulated sum has crossed a
/// target. Covers rounding in long summations (e.g. ten steps of 0.1 summing
/// to 0.9999999999999999 must count as reaching 1.0).
const CROSSING_SLACK: f64 = 1e-12;

impl StepSchedule {
    pub fn new(eta0: f64, alpha: f64) -> Result<Self> {
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta0 must be positive and finite, got {eta0}"
            )));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        Ok(StepSchedule { eta0, alpha })
    }

    /// `eta_n = eta0 * n^(-alpha)` for `n >= 1`.
    pub fn step_at(&self, n: u64) -> f64 {
        assert!(n >= 1, "step index must be >= 1 (steps are 1-indexed)");
        if self.alpha == 0.0 {
            self.eta0
        } else {
            self.eta0 * (n as f64).powf(-self.alpha)
        }
    }

    /// Exact partial sums over `[lo, hi]` by direct summation.
    pub fn cumulative(&self, lo: u64, hi: u64) -> Result<PartialSums> {
        if lo < 1 || lo > hi {
            return Err(Error::InvalidParameter(format!(
                "cumulative window requires 1 <= lo <= hi, got lo={lo}, hi={hi}"
            )));
        }
        let mut sum_eta = 0.0;
        let mut sum_eta_sq = 0.0;
        for n in lo..=hi {
            let eta = self.step_at(n);
            sum_eta += eta;
            sum_eta_sq += eta * eta;
        }
        Ok(PartialSums {
            lo,
            hi,
            sum_eta,
            sum_eta_sq,
        })
    }

    /// Smallest `n > o` such that `eta_{o+1:n} >= target`.
    ///
    /// The result always satisfies `target <= eta_{o+1:n} <= target + eta_{o+1}`
    /// since the scan stops at the first crossing. A crossing is accepted with
    /// relative slack [`CROSSING_SLACK`] to absorb summation rounding.
    pub fn window_end(&self, o: u64, target: f64) -> u64 {
        assert!(target > 0.0, "window target must be positive");
        let mut sum = 0.0;
        let mut n = o;
        loop {
            n += 1;
            sum += self.step_at(n);
            let slack = CROSSING_SLACK * (target.max(1.0) + sum.abs());
            if sum >= target - slack {
                return n;
            }
        }
    }

    /// Prefix cache of `eta_{1:n}` and `eta^2_{1:n}` for `n <= budget`.
    pub fn prefix(&self, budget: u64) -> PrefixSums {
        let len = budget as usize + 1;
        let mut sum = vec![0.0; len];
        let mut sum_sq = vec![0.0; len];
        for n in 1..len {
            let eta = self.step_at(n as u64);
            sum[n] = sum[n - 1] + eta;
            sum_sq[n] = sum_sq[n - 1] + eta * eta;
        }
        PrefixSums {
            schedule: *self,
            sum,
            sum_sq,
        }
    }
}

/// Cached prefix sums of a schedule up to a fixed budget.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    schedule: StepSchedule,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl PrefixSums {
    pub fn budget(&self) -> u64 {
        (self.sum.len() - 1) as u64
    }

    /// `eta_{lo:hi}` from the cache. Windows read as prefix differences, so
    /// results can differ from direct summation by the cache's rounding;
    /// `eta_{1:hi}` itself is bit-identical to direct summation.
    pub fn sum_eta(&self, lo: u64, hi: u64) -> f64 {
        assert!(lo >= 1 && lo <= hi && hi <= self.budget());
        self.sum[hi as usize] - self.sum[(lo - 1) as usize]
    }

    pub fn sum_eta_sq(&self, lo: u64, hi: u64) -> f64 {
        assert!(lo >= 1 && lo <= hi && hi <= self.budget());
        self.sum_sq[hi as usize] - self.sum_sq[(lo - 1) as usize]
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_step() {
        let s = StepSchedule::new(0.1, 0.0).unwrap();
        assert_eq!(s.step_at(7), 0.1);
    }

    #[test]
    fn closed_form_half() {
        let s = StepSchedule::new(0.1, 0.5).unwrap();
        assert_relative_eq!(s.step_at(4), 0.05, max_relative = 1e-15);
    }

    #[test]
    fn high_precision_decay() {
        // 0.05 * 1000^(-0.9) evaluated independently in log space.
        let s = StepSchedule::new(0.05, 0.9).unwrap();
        let expected = (0.05f64.ln() - 0.9 * 1000.0f64.ln()).exp();
        assert_relative_eq!(s.step_at(1000), expected, max_relative = 1e-13);
        assert_relative_eq!(s.step_at(1000), 9.976311574844398e-5, max_relative = 1e-12);
    }

    #[test]
    #[should_panic]
    fn zero_index_rejected() {
        let s = StepSchedule::new(0.1, 0.5).unwrap();
        s.step_at(0);
    }

    #[test]
    fn cumulative_constant() {
        let s = StepSchedule::new(1.0, 0.0).unwrap();
        let p = s.cumulative(1, 10).unwrap();
        assert_eq!(p.sum_eta, 10.0);
        assert_eq!(p.sum_eta_sq, 10.0);
    }

    #[test]
    fn cumulative_integral_lower_bound() {
        // eta_{1:N} >= eta0 * integral_1^N t^(-1/2) dt = 2(sqrt(N) - 1)
        let s = StepSchedule::new(1.0, 0.5).unwrap();
        for n in [10u64, 100, 1000, 12345] {
            let p = s.cumulative(1, n).unwrap();
            assert!(p.sum_eta >= 2.0 * ((n as f64).sqrt() - 1.0));
        }
    }

    #[test]
    fn cumulative_matches_brute_force() {
        let s = StepSchedule::new(0.1, 0.3).unwrap();
        let p = s.cumulative(5, 50).unwrap();
        // 46-term oracle written out independently.
        let mut want = 0.0;
        let mut want_sq = 0.0;
        for n in 5..=50u64 {
            let eta = 0.1 / (n as f64).powf(0.3);
            want += eta;
            want_sq += eta * eta;
        }
        assert_relative_eq!(p.sum_eta, want, max_relative = 1e-13);
        assert_relative_eq!(p.sum_eta_sq, want_sq, max_relative = 1e-13);
    }

    #[test]
    fn cumulative_bad_window() {
        let s = StepSchedule::new(0.1, 0.3).unwrap();
        assert!(s.cumulative(5, 4).is_err());
        assert!(s.cumulative(0, 4).is_err());
    }

    #[test]
    fn window_end_constant() {
        let s = StepSchedule::new(0.1, 0.0).unwrap();
        assert_eq!(s.window_end(0, 1.0), 10);
        // Overshoot bound: eta_{1:10} = 1.0 <= 0.95 + 0.1.
        assert_eq!(s.window_end(0, 0.95), 10);
    }

    #[test]
    fn window_end_matches_linear_scan() {
        let s = StepSchedule::new(0.2, 0.6).unwrap();
        let o = 100u64;
        let target = 2.0;
        let got = s.window_end(o, target);
        // Linear scan oracle.
        let mut sum = 0.0;
        let mut n = o;
        let expected = loop {
            n += 1;
            sum += 0.2 / (n as f64).powf(0.6);
            if sum >= target {
                break n;
            }
        };
        assert_eq!(got, expected);
        let mass = s.cumulative(o + 1, got).unwrap().sum_eta;
        assert!(mass >= target - 1e-9);
        assert!(mass <= target + s.step_at(o + 1) + 1e-9);
    }

    #[test]
    fn prefix_matches_direct() {
        let s = StepSchedule::new(0.3, 0.45).unwrap();
        let prefix = s.prefix(500);
        let direct = s.cumulative(1, 500).unwrap();
        assert_eq!(prefix.sum_eta(1, 500), direct.sum_eta);
        assert_eq!(prefix.sum_eta_sq(1, 500), direct.sum_eta_sq);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(StepSchedule::new(0.0, 0.5).is_err());
        assert!(StepSchedule::new(-1.0, 0.5).is_err());
        assert!(StepSchedule::new(0.1, 1.0).is_err());
        assert!(StepSchedule::new(0.1, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn monotone_nonincreasing(
            eta0 in 1e-4f64..10.0,
            alpha in 0.0f64..0.999,
            n in 1u64..100_000,
        ) {
            let s = StepSchedule::new(eta0, alpha).unwrap();
            prop_assert!(s.step_at(n + 1) <= s.step_at(n));
            prop_assert!(s.step_at(n) > 0.0);
        }

        #[test]
        fn integral_bracketing(
            eta0 in 1e-3f64..5.0,
            alpha in 0.01f64..0.99,
            n in 2u64..5_000,
        ) {
            // eta0 * (N^(1-a) - 1)/(1-a) <= eta_{1:N} <= eta0 * (1 + (N^(1-a) - 1)/(1-a))
            let s = StepSchedule::new(eta0, alpha).unwrap();
            let sum = s.cumulative(1, n).unwrap().sum_eta;
            let integral = ((n as f64).powf(1.0 - alpha) - 1.0) / (1.0 - alpha);
            prop_assert!(sum >= eta0 * integral - 1e-9 * sum.abs());
            prop_assert!(sum <= eta0 * (1.0 + integral) + 1e-9 * sum.abs());
        }

        #[test]
        fn partial_sums_invariant(
            eta0 in 1e-3f64..5.0,
            alpha in 0.0f64..0.99,
            lo in 1u64..500,
            len in 0u64..500,
        ) {
            // sum_eta_sq <= step_at(lo) * sum_eta since steps are non-increasing
            let s = StepSchedule::new(eta0, alpha).unwrap();
            let p = s.cumulative(lo, lo + len).unwrap();
            prop_assert!(p.sum_eta >= 0.0);
            prop_assert!(p.sum_eta_sq <= s.step_at(lo) * p.sum_eta * (1.0 + 1e-12));
        }

        #[test]
        fn window_end_bracketing(
            eta0 in 1e-3f64..2.0,
            alpha in 0.0f64..0.9,
            o in 0u64..200,
            target_mult in 1.0f64..50.0,
        ) {
            let s = StepSchedule::new(eta0, alpha).unwrap();
            let target = target_mult * s.step_at(o + 1);
            let n = s.window_end(o, target);
            let mass = s.cumulative(o + 1, n).unwrap().sum_eta;
            prop_assert!(mass >= target - 1e-9 * target.max(1.0));
            prop_assert!(mass <= target + s.step_at(o + 1) + 1e-9 * target.max(1.0));
        }
    }
}
