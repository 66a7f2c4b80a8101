//! Saddle-escape experiment: SGLD started at a strict saddle, compared to
//! the exact Ornstein-Uhlenbeck loss curve, plus the discrete escape-lemma
//! contract on its own step-mass window.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ContractParams, EscapeSpec};
use crate::dynamics::{run, DynamicsConfig, Method};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{Problem, QuadraticSaddle};
use crate::rng::aux_stream;
use crate::schedule::StepSchedule;
use crate::theory::{escape_window, ou_expected_loss};

#[derive(Debug, Clone, Serialize)]
pub struct EscapeRecord {
    pub replica: u64,
    /// Loss at the end of the OU-comparison window.
    pub final_loss: f64,
    /// Largest displacement from the saddle observed at the recorded window
    /// ends (exactly zero for `delta0 = 0` on the noiseless saddle).
    pub displacement: f64,
    /// Loss at the end of the lemma-contract window, when checked.
    pub contract_final_loss: Option<f64>,
}

/// One-sided checklist entry for the escape-lemma parameter conditions.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub observed: f64,
    pub required: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractReport {
    /// Window width `D5 = (2/lambda_H) log((16 D4 + 40)/lambda_H)` from the
    /// Hessian at the saddle.
    pub d5: f64,
    pub lambda_h: f64,
    pub d4: f64,
    pub window_end: u64,
    pub window_mass: f64,
    /// All parameter conditions of the escape lemma, evaluated with unit
    /// absolute constant.
    pub conditions: Vec<ConditionCheck>,
    pub conditions_met: bool,
    pub mean_loss: f64,
    pub std_error: f64,
    /// Contract right-hand side `F(X_0) - eta-mass * delta0^2`.
    pub rhs: f64,
    /// Mean final loss is below the contract threshold (within 3 SE).
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EscapeSummary {
    pub dim: usize,
    /// Continuous escape time `log(2d) / (4 lambda_max(-H))`.
    pub t_star: f64,
    pub window_end: u64,
    pub window_mass: f64,
    pub ou_prediction: f64,
    pub mean_loss: f64,
    pub std_error: f64,
    /// `-(d delta0^2)/4`, the saddle-departure threshold.
    pub saddle_bound: f64,
    /// |mean - OU prediction| <= 3 SE.
    pub matches_ou: bool,
    /// mean <= saddle bound + 3 SE.
    pub below_saddle_bound: bool,
    pub max_displacement: f64,
    pub contract: Option<ContractReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EscapeReport {
    pub summary: EscapeSummary,
    pub records: Vec<EscapeRecord>,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

pub fn run_escape_experiment(
    spec: &EscapeSpec,
    replicas: u64,
    master_seed: u64,
) -> Result<EscapeReport> {
    spec.validate()?;
    let h = match spec.rotate_seed {
        None => DMatrix::from_diagonal(&DVector::from_row_slice(&spec.eigenvalues)),
        Some(seed) => {
            let mut rng = aux_stream(seed, 0xA11);
            linalg::symmetric_with_spectrum(&spec.eigenvalues, &mut rng)
        }
    };
    let problem = QuadraticSaddle::new(h.clone(), 0.0)?;
    let dim = problem.dim();
    let schedule = StepSchedule::new(spec.eta0, spec.alpha)?;

    // Continuous-time pick t* = log(2d) / (-4 lambda_min(H)); by then the
    // OU expectation has fallen below -d delta0^2 / 4.
    let lambda_min = linalg::sym_eigenvalues(&h)[0];
    let peel_rate = 4.0 * (-lambda_min);
    let t_star = (2.0 * dim as f64).ln() / peel_rate;
    let window_end = schedule.window_end(0, t_star);
    let window_mass = schedule.cumulative(1, window_end)?.sum_eta;

    // Optional lemma-contract window on the same trajectory family.
    let contract_plan = spec
        .contract
        .as_ref()
        .map(|params| plan_contract(&problem, params, spec, &schedule))
        .transpose()?;
    let total_steps = contract_plan
        .as_ref()
        .map(|p| p.window_end.max(window_end))
        .unwrap_or(window_end);

    let cfg = DynamicsConfig {
        method: Method::Sgld,
        delta0: spec.delta0,
        schedule,
        max_iters: total_steps,
        seed: master_seed,
    };
    let x0 = DVector::zeros(dim);

    struct ReplicaOut {
        record: EscapeRecord,
    }
    let outs: Vec<ReplicaOut> = (0..replicas)
        .into_par_iter()
        .map(|replica| -> Result<ReplicaOut> {
            // Thin = 1 keeps every iterate; windows are a few thousand steps.
            let traj = run(&problem, &cfg, &x0, replica, Some(1), |_, _| false)?;
            let loss_at = |n: u64| -> f64 {
                traj.samples
                    .iter()
                    .find(|s| s.iteration == n)
                    .map(|s| s.loss)
                    .unwrap_or(f64::NAN)
            };
            let iterate_at = |n: u64| -> Option<&DVector<f64>> {
                traj.iterates
                    .iter()
                    .find(|(i, _)| *i == n)
                    .map(|(_, x)| x)
            };
            let final_loss = loss_at(window_end);
            let mut displacement = iterate_at(window_end).map(|x| x.norm()).unwrap_or(0.0);
            let contract_final_loss = contract_plan.as_ref().map(|p| {
                displacement =
                    displacement.max(iterate_at(p.window_end).map(|x| x.norm()).unwrap_or(0.0));
                loss_at(p.window_end)
            });
            Ok(ReplicaOut {
                record: EscapeRecord {
                    replica,
                    final_loss,
                    displacement,
                    contract_final_loss,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let records: Vec<EscapeRecord> = outs.into_iter().map(|o| o.record).collect();
    let losses: Vec<f64> = records.iter().map(|r| r.final_loss).collect();
    let (mean_loss, std_error) = mean_and_se(&losses);
    let ou_prediction = ou_expected_loss(&h, spec.delta0, window_mass)?;
    let saddle_bound = -(dim as f64) * spec.delta0 * spec.delta0 / 4.0;
    let max_displacement = records
        .iter()
        .map(|r| r.displacement)
        .fold(0.0f64, f64::max);

    let contract = contract_plan
        .map(|plan| finish_contract(plan, &records))
        .transpose()?;

    let summary = EscapeSummary {
        dim,
        t_star,
        window_end,
        window_mass,
        ou_prediction,
        mean_loss,
        std_error,
        saddle_bound,
        matches_ou: (mean_loss - ou_prediction).abs() <= 3.0 * std_error,
        below_saddle_bound: mean_loss <= saddle_bound + 3.0 * std_error,
        max_displacement,
        contract,
    };
    Ok(EscapeReport { summary, records })
}

struct ContractPlan {
    d5: f64,
    lambda_h: f64,
    d4: f64,
    window_end: u64,
    window_mass: f64,
    conditions: Vec<ConditionCheck>,
    conditions_met: bool,
    rhs: f64,
}

/// Evaluates the escape-lemma window and parameter conditions at the saddle:
/// `lambda_H` and `D4` come from the Hessian `2H`, the window accumulates
/// `[2 D5, 3 D5]` of step mass, and the volatility/step/gradient caps are
/// checked with `C6 = max(q^-1.5 C3, lambda_H^-1, 1, D5)`.
fn plan_contract(
    problem: &QuadraticSaddle,
    params: &ContractParams,
    spec: &EscapeSpec,
    schedule: &StepSchedule,
) -> Result<ContractPlan> {
    let hess = problem.hessian(&DVector::zeros(problem.dim()))?;
    let eigs = linalg::sym_eigenvalues(&hess);
    let lambda_h = -eigs[0];
    let d4: f64 = eigs.iter().filter(|v| **v > 0.0).sum();
    let d5 = escape_window(lambda_h, d4)?;
    let window_end = schedule.window_end(0, 2.0 * d5);
    let window_mass = schedule.cumulative(1, window_end)?.sum_eta;

    let dim = problem.dim() as f64;
    let c6 = (params.q.powf(-1.5) * params.c3)
        .max(1.0 / lambda_h)
        .max(1.0)
        .max(d5);
    let delta0_cap =
        dim.powf(-1.5) * c6.powf(-3.5) * (-(9.0 + 18.0 * params.q) * d5 * lambda_h).exp();
    let eta_cap = spec.delta0 * spec.delta0 / params.b2;
    let grad_norm = problem.grad(&DVector::zeros(problem.dim()))?.norm();
    let grad_cap = spec.delta0 * (dim * lambda_h.min(1.0).min(1.0 / window_mass)).sqrt();

    let mut conditions = vec![
        ConditionCheck {
            name: "window_mass_at_least_2_d5",
            observed: window_mass,
            required: 2.0 * d5,
            satisfied: window_mass >= 2.0 * d5 - 1e-9 * d5,
        },
        ConditionCheck {
            name: "window_mass_at_most_3_d5",
            observed: window_mass,
            required: 3.0 * d5,
            satisfied: window_mass <= 3.0 * d5 + 1e-9 * d5,
        },
        ConditionCheck {
            name: "delta0_within_cap",
            observed: spec.delta0,
            required: delta0_cap,
            satisfied: spec.delta0 <= delta0_cap,
        },
        ConditionCheck {
            name: "eta1_within_noise_cap",
            observed: schedule.step_at(1),
            required: eta_cap,
            satisfied: schedule.step_at(1) <= eta_cap,
        },
        ConditionCheck {
            name: "grad_at_start_within_cap",
            observed: grad_norm,
            required: grad_cap,
            satisfied: grad_norm <= grad_cap,
        },
    ];
    // Step-product hypothesis of the matrix estimates the lemma rests on.
    let opnorm = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    conditions.push(ConditionCheck {
        name: "step_times_hessian_norm_below_half",
        observed: schedule.step_at(1) * opnorm,
        required: 0.5,
        satisfied: schedule.step_at(1) * opnorm < 0.5,
    });
    let conditions_met = conditions.iter().all(|c| c.satisfied);
    let rhs = -window_mass * spec.delta0 * spec.delta0; // F(X_0) = 0 at the saddle
    Ok(ContractPlan {
        d5,
        lambda_h,
        d4,
        window_end,
        window_mass,
        conditions,
        conditions_met,
        rhs,
    })
}

fn finish_contract(plan: ContractPlan, records: &[EscapeRecord]) -> Result<ContractReport> {
    let losses: Vec<f64> = records
        .iter()
        .filter_map(|r| r.contract_final_loss)
        .collect();
    if losses.is_empty() {
        return Err(Error::InvalidParameter(
            "contract window produced no samples".into(),
        ));
    }
    let (mean_loss, std_error) = mean_and_se(&losses);
    Ok(ContractReport {
        d5: plan.d5,
        lambda_h: plan.lambda_h,
        d4: plan.d4,
        window_end: plan.window_end,
        window_mass: plan.window_mass,
        conditions: plan.conditions,
        conditions_met: plan.conditions_met,
        mean_loss,
        std_error,
        rhs: plan.rhs,
        holds: mean_loss <= plan.rhs + 3.0 * std_error,
    })
}
