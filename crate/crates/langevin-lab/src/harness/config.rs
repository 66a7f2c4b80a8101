//! Experiment configuration: a single schema-validated JSON document per
//! run. All resolved values (including computed theorem constants) are
//! echoed back into the report so no silent default survives unaudited.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsConfig, Method};
use crate::error::{Error, Result};
use crate::problems::ProblemConfig;
use crate::rng::aux_stream;
use crate::schedule::StepSchedule;
use crate::stationarity::RegionSpec;
use crate::theory::{ErgodicBoundInputs, FospBoundInputs, SospBoundInputs};

/// Hard cap on per-replica iteration budgets. Theorem-prescribed budgets
/// above the cap are reported as "not testable at desk scale" rather than
/// silently truncated.
pub const BUDGET_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSpec,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_replicas() -> u64 {
    100
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::config("replicas", "must be >= 1"));
        }
        self.experiment.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)] // parsed once per run; boxing would only obscure the schema
pub enum ExperimentSpec {
    /// Hitting time to a first-order stationary region.
    HittingFosp(HittingSpec),
    /// Hitting time to a second-order stationary region.
    HittingSosp(HittingSpec),
    /// Saddle escape against the OU reference dynamics.
    Escape(EscapeSpec),
    /// SGLD vs PGD reachability of a target ball.
    Ergodicity(ErgodicitySpec),
    /// Closed-form constants and matrix-product validators.
    CheckBounds(CheckBoundsSpec),
    /// Analytic vs empirical assumption constants.
    EstimateConstants(EstimateConstantsSpec),
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentSpec::HittingFosp(s) | ExperimentSpec::HittingSosp(s) => s.validate(),
            ExperimentSpec::Escape(s) => s.validate(),
            ExperimentSpec::Ergodicity(s) => s.validate(),
            ExperimentSpec::CheckBounds(_) => Ok(()),
            ExperimentSpec::EstimateConstants(s) => s.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::HittingFosp(_) => "hitting_fosp",
            ExperimentSpec::HittingSosp(_) => "hitting_sosp",
            ExperimentSpec::Escape(_) => "escape",
            ExperimentSpec::Ergodicity(_) => "ergodicity",
            ExperimentSpec::CheckBounds(_) => "check_bounds",
            ExperimentSpec::EstimateConstants(_) => "estimate_constants",
        }
    }
}

/// Initial iterate specification.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPoint {
    #[default]
    Zero,
    /// Minimizer (when the problem has one) displaced by `distance` along
    /// the first coordinate axis.
    OffsetE1 { distance: f64 },
    Explicit { values: Vec<f64> },
    /// Uniform in the ball of `radius` around the origin, seeded from the
    /// master seed.
    RandomBall { radius: f64 },
}

impl InitialPoint {
    pub fn build(
        &self,
        problem: &dyn crate::problems::Problem,
        master_seed: u64,
    ) -> Result<DVector<f64>> {
        let dim = problem.dim();
        Ok(match self {
            InitialPoint::Zero => DVector::zeros(dim),
            InitialPoint::OffsetE1 { distance } => {
                let mut x = problem.minimizer().unwrap_or_else(|| DVector::zeros(dim));
                x[0] += distance;
                x
            }
            InitialPoint::Explicit { values } => {
                if values.len() != dim {
                    return Err(Error::config(
                        "x0.values",
                        format!("expected {dim} entries, got {}", values.len()),
                    ));
                }
                DVector::from_row_slice(values)
            }
            InitialPoint::RandomBall { radius } => {
                let mut rng = aux_stream(master_seed, 0x1417);
                crate::problems::uniform_ball(dim, *radius, &mut rng)
            }
        })
    }
}

/// Dynamics parameters as they appear in configs; the RNG seed comes from
/// the experiment's master seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub method: Method,
    pub delta0: f64,
    pub eta0: f64,
    pub alpha: f64,
    pub max_iters: u64,
}

impl DynamicsSpec {
    pub fn to_config(&self, seed: u64) -> Result<DynamicsConfig> {
        let cfg = DynamicsConfig {
            method: self.method,
            delta0: self.delta0,
            schedule: StepSchedule::new(self.eta0, self.alpha)?,
            max_iters: self.max_iters.min(BUDGET_CAP),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Region parameters for the hitting experiments.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionParams {
    pub epsilon: f64,
    #[serde(default)]
    pub lambda_eps: Option<f64>,
}

/// Constants feeding the hitting-time prescriptions when
/// `use_theorem_params` is set: `delta0`, `eta0`, and the budget are filled
/// from the first-order caps (FOSP runs) or the second-order chain (SOSP
/// runs, which additionally need `c0`, `c3`, `d4`, `b2`, and `q`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremParams {
    pub c2: f64,
    pub b1: f64,
    pub rho: f64,
    #[serde(default = "one")]
    pub c_alpha: f64,
    /// `F(X_0)`; defaults to the loss at the configured initial point.
    #[serde(default)]
    pub f0: Option<f64>,
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default)]
    pub c3: Option<f64>,
    #[serde(default)]
    pub d4: Option<f64>,
    #[serde(default)]
    pub b2: Option<f64>,
    #[serde(default = "one")]
    pub q: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "over", rename_all = "snake_case")]
pub enum SweepSpec {
    /// Sweep the region tolerance; the initial step follows
    /// `eta0 = eta0_coeff * epsilon^2`.
    Epsilon { values: Vec<f64>, eta0_coeff: f64 },
    /// Sweep the problem dimension (linear regression only), holding the
    /// region and dynamics fixed.
    Dimension { values: Vec<usize> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingSpec {
    pub problem: ProblemConfig,
    pub dynamics: DynamicsSpec,
    pub region: RegionParams,
    #[serde(default)]
    pub x0: InitialPoint,
    /// Region-test cadence; defaults to 1 for `dim <= 64`, else 10 (SOSP
    /// checks cost an eigensolve).
    #[serde(default)]
    pub check_every: Option<u64>,
    #[serde(default)]
    pub use_theorem_params: Option<TheoremParams>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Export full trajectories for the first `trajectory_replicas` replicas.
    #[serde(default)]
    pub trajectory_replicas: u64,
}

impl HittingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.region.epsilon < 0.0 {
            return Err(Error::config("region.epsilon", "must be nonnegative"));
        }
        if let Some(SweepSpec::Epsilon { values, eta0_coeff }) = &self.sweep {
            if values.is_empty() || *eta0_coeff <= 0.0 {
                return Err(Error::config("sweep", "needs values and eta0_coeff > 0"));
            }
        }
        if let Some(SweepSpec::Dimension { values }) = &self.sweep {
            if values.is_empty() {
                return Err(Error::config("sweep.values", "must be non-empty"));
            }
            if !matches!(self.problem, ProblemConfig::LinearRegression { .. }) {
                return Err(Error::config(
                    "sweep",
                    "dimension sweeps are defined for linear_regression",
                ));
            }
        }
        Ok(())
    }

    pub fn region_spec(&self, second_order: bool) -> Result<RegionSpec> {
        if second_order {
            let lambda_eps = self.region.lambda_eps.ok_or_else(|| {
                Error::config("region.lambda_eps", "required for hitting_sosp")
            })?;
            RegionSpec::sosp(self.region.epsilon, lambda_eps)
        } else {
            RegionSpec::fosp(self.region.epsilon)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeSpec {
    /// Eigenvalues of the quadratic-form matrix `H` (loss `x^T H x`); at
    /// least one must be negative.
    pub eigenvalues: Vec<f64>,
    #[serde(default)]
    pub rotate_seed: Option<u64>,
    pub delta0: f64,
    pub eta0: f64,
    #[serde(default)]
    pub alpha: f64,
    /// Also verify the discrete escape-lemma contract on its `[2 D5, 3 D5]`
    /// window with these parameters.
    #[serde(default)]
    pub contract: Option<ContractParams>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractParams {
    /// Free window parameter `q > 0`.
    pub q: f64,
    /// Fourth-moment noise bound (1 for the noiseless saddle).
    pub b2: f64,
    /// Hessian Lipschitz constant (0 for the exact quadratic, which makes
    /// the stopping radius infinite).
    pub c3: f64,
}

impl EscapeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eigenvalues.is_empty() {
            return Err(Error::config("eigenvalues", "must be non-empty"));
        }
        if !self.eigenvalues.iter().any(|v| *v < 0.0) {
            return Err(Error::config(
                "eigenvalues",
                "escape needs a strict saddle: at least one negative eigenvalue",
            ));
        }
        if self.delta0 < 0.0 {
            return Err(Error::config("delta0", "must be nonnegative"));
        }
        if let Some(c) = &self.contract {
            if c.q <= 0.0 || c.b2 < 1.0 || c.c3 < 0.0 {
                return Err(Error::config(
                    "contract",
                    "needs q > 0, b2 >= 1, c3 >= 0",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicitySpec {
    #[serde(default = "scalar_problem")]
    pub problem: ProblemConfig,
    pub delta0: f64,
    pub eta0: f64,
    pub alpha: f64,
    pub budget: u64,
    /// Center of the target ball.
    pub z0: Vec<f64>,
    pub eps: f64,
    /// PGD hits are also counted restricted to iterations past this mark
    /// (the Dirac-limit contrast ignores the early diffusive transient).
    #[serde(default = "default_late_mark")]
    pub late_mark: u64,
    /// Iterations at which the first-coordinate variance is recorded and,
    /// for the scalar problem, compared against the exact recursion.
    #[serde(default)]
    pub variance_checkpoints: Vec<u64>,
}

fn scalar_problem() -> ProblemConfig {
    ProblemConfig::ScalarQuadratic
}

fn default_late_mark() -> u64 {
    10_000
}

impl ErgodicitySpec {
    pub fn validate(&self) -> Result<()> {
        if self.eps <= 0.0 {
            return Err(Error::config("eps", "must be positive"));
        }
        if self.budget == 0 || self.budget > BUDGET_CAP {
            return Err(Error::config(
                "budget",
                format!("must lie in [1, {BUDGET_CAP}]"),
            ));
        }
        if self.variance_checkpoints.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config(
                "variance_checkpoints",
                "must be nondecreasing",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixBoundsSpec {
    pub eigenvalues: Vec<f64>,
    #[serde(default)]
    pub rotate_seed: Option<u64>,
    pub eta0: f64,
    pub alpha: f64,
    /// Window `(o, n]` of the step sequence.
    pub o: usize,
    pub n: usize,
    /// Additionally run this many randomized admissible instances
    /// (dimension <= 10) and report the worst margins.
    #[serde(default)]
    pub randomized_instances: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSpec {
    pub eigenvalues: Vec<f64>,
    pub delta0: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeWindowSpec {
    pub lambda_h: f64,
    pub d4: f64,
}

/// Ergodic-constant inputs; `d_f` may be omitted when a problem is given,
/// in which case it is bounded via the problem's gradient-norm bound over
/// `|x| <= 4 D_X`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicInputsSpec {
    pub c7: f64,
    pub d7: f64,
    pub b1: f64,
    pub b2: f64,
    pub dim: usize,
    pub delta0: f64,
    pub eta0: f64,
    pub alpha: f64,
    pub z0: Vec<f64>,
    pub eps: f64,
    pub p0: f64,
    pub f_at_n0: f64,
    #[serde(default)]
    pub d_f: Option<f64>,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub c_alpha_draws: Option<u64>,
}

impl ErgodicInputsSpec {
    pub fn to_inputs(&self) -> Result<(ErgodicBoundInputs, u64)> {
        let mut inputs = ErgodicBoundInputs {
            c7: self.c7,
            d7: self.d7,
            b1: self.b1,
            b2: self.b2,
            dim: self.dim,
            delta0: self.delta0,
            eta0: self.eta0,
            alpha: self.alpha,
            z0: self.z0.clone(),
            eps: self.eps,
            p0: self.p0,
            f_at_n0: self.f_at_n0,
            d_f: self.d_f,
        };
        if inputs.d_f.is_none() {
            let problem = self
                .problem
                .as_ref()
                .ok_or_else(|| Error::config("ergodic.d_f", "supply d_f or a problem"))?
                .build()?;
            // D_X depends only on the scalar inputs, so compute it here to
            // derive D_F from the problem's gradient bound.
            let d = self.dim as f64;
            let m_v = 8.0 / self.c7 * (self.d7 + 6.0 * self.b1 + 6.0 * d * self.delta0.powi(2));
            let z0_norm = DVector::from_row_slice(&self.z0).norm();
            let d_x = (self.d7 + self.c7 * m_v).max(z0_norm).max(1.0);
            inputs.d_f = Some(problem.grad_norm_bound(4.0 * d_x));
        }
        Ok((
            inputs,
            self.c_alpha_draws.unwrap_or(crate::theory::C_ALPHA_DRAWS),
        ))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckBoundsSpec {
    pub matrix_bounds: Option<MatrixBoundsSpec>,
    pub fosp: Option<FospBoundInputs>,
    pub sosp: Option<SospBoundInputs>,
    pub ergodic: Option<ErgodicInputsSpec>,
    pub escape_window: Option<EscapeWindowSpec>,
    pub ou_expected_loss: Option<OuSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConstantsSpec {
    pub problem: ProblemConfig,
    pub gamma: f64,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_points")]
    pub points: u64,
    /// Re-derive the power-of-two calibration instead of using the stored
    /// family default.
    #[serde(default)]
    pub calibrate: bool,
}

fn default_samples() -> u64 {
    20_000
}

fn default_points() -> u64 {
    10
}

impl EstimateConstantsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(Error::config("gamma", "must be positive"));
        }
        if self.samples < 10_000 {
            return Err(Error::config("samples", "estimator needs >= 10^4 draws"));
        }
        if self.points < 10 {
            return Err(Error::config("points", "estimator needs >= 10 points"));
        }
        Ok(())
    }
}
