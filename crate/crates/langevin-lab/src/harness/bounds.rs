//! `check-bounds` and `estimate-constants` handlers: evaluate whichever
//! calculators and validators the config requests and emit one JSON report.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use super::config::{CheckBoundsSpec, EstimateConstantsSpec, MatrixBoundsSpec};
use crate::constants::{dominance_report, empirical_constants, CalibratedC};
use crate::error::Result;
use crate::linalg;
use crate::rng::aux_stream;
use crate::schedule::StepSchedule;
use crate::theory::{
    check_matrix_product_bounds, ergodic_constants, escape_window, fosp_bound, ou_expected_loss,
    sosp_bound, MatrixBoundsReport,
};

#[derive(Debug, Clone, Serialize)]
pub struct RandomizedBoundsSummary {
    pub instances: u64,
    pub all_pass: bool,
    pub worst_margin: f64,
    pub worst_claim: String,
    /// How many instances exercised each side-conditioned claim.
    pub c_floor_applicable: u64,
    pub e_combination_applicable: u64,
}

pub fn run_check_bounds(spec: &CheckBoundsSpec, master_seed: u64) -> Result<serde_json::Value> {
    let mut out = serde_json::Map::new();
    if let Some(mb) = &spec.matrix_bounds {
        let report = single_matrix_bounds(mb)?;
        out.insert("matrix_bounds".into(), serde_json::to_value(&report)?);
        if mb.randomized_instances > 0 {
            let summary = randomized_matrix_bounds(mb.randomized_instances, master_seed)?;
            out.insert(
                "matrix_bounds_randomized".into(),
                serde_json::to_value(&summary)?,
            );
        }
    }
    if let Some(inputs) = &spec.fosp {
        let bound = fosp_bound(inputs)?;
        out.insert(
            "fosp".into(),
            json!({"inputs": inputs, "bound": bound}),
        );
    }
    if let Some(inputs) = &spec.sosp {
        let bound = sosp_bound(inputs)?;
        out.insert(
            "sosp".into(),
            json!({"inputs": inputs, "bound": bound}),
        );
    }
    if let Some(ew) = &spec.escape_window {
        let d5 = escape_window(ew.lambda_h, ew.d4)?;
        out.insert(
            "escape_window".into(),
            json!({"lambda_h": ew.lambda_h, "d4": ew.d4, "d5": d5}),
        );
    }
    if let Some(ou) = &spec.ou_expected_loss {
        let h = DMatrix::from_diagonal(&DVector::from_row_slice(&ou.eigenvalues));
        let value = ou_expected_loss(&h, ou.delta0, ou.t)?;
        out.insert(
            "ou_expected_loss".into(),
            json!({"eigenvalues": ou.eigenvalues, "delta0": ou.delta0, "t": ou.t, "value": value}),
        );
    }
    if let Some(erg) = &spec.ergodic {
        let (inputs, draws) = erg.to_inputs()?;
        let mut rng = aux_stream(master_seed, 0xE26);
        let consts = ergodic_constants(&inputs, draws, &mut rng)?;
        out.insert(
            "ergodic".into(),
            json!({"inputs": inputs, "constants": consts}),
        );
    }
    Ok(serde_json::Value::Object(out))
}

fn single_matrix_bounds(mb: &MatrixBoundsSpec) -> Result<MatrixBoundsReport> {
    let h = match mb.rotate_seed {
        None => DMatrix::from_diagonal(&DVector::from_row_slice(&mb.eigenvalues)),
        Some(seed) => {
            let mut rng = aux_stream(seed, 0xA11);
            linalg::symmetric_with_spectrum(&mb.eigenvalues, &mut rng)
        }
    };
    let schedule = StepSchedule::new(mb.eta0, mb.alpha)?;
    let etas: Vec<f64> = (1..=mb.n as u64).map(|i| schedule.step_at(i)).collect();
    check_matrix_product_bounds(&h, &etas, mb.o, mb.n)
}

/// Randomized admissible instances of the matrix-product validators:
/// dimension <= 10, at least one negative eigenvalue, schedules under the
/// `eta |H| < 1/2` hypothesis, and windows sized so the mass-conditioned
/// claims are exercised on a large fraction of draws.
pub fn randomized_matrix_bounds(
    instances: u64,
    master_seed: u64,
) -> Result<RandomizedBoundsSummary> {
    let mut rng = aux_stream(master_seed, 0xB0B);
    let mut worst_margin = f64::INFINITY;
    let mut worst_claim = String::new();
    let mut all_pass = true;
    let mut c_floor = 0u64;
    let mut e_comb = 0u64;
    for _ in 0..instances {
        let dim = rng.gen_range(1..=10usize);
        let mut spectrum: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..3.0)).collect();
        spectrum[0] = -rng.gen_range(0.3..2.0); // ensure a strict saddle
        let h = if dim == 1 {
            DMatrix::from_element(1, 1, spectrum[0])
        } else {
            linalg::symmetric_with_spectrum(&spectrum, &mut rng)
        };
        let opnorm = linalg::sym_opnorm(&h);
        let lambda_h = -linalg::sym_eigenvalues(&h)[0];
        let d4: f64 = linalg::sym_eigenvalues(&h)
            .iter()
            .filter(|v| **v > 0.0)
            .sum();
        let eta0 = 0.49 / opnorm * rng.gen_range(0.3..1.0);
        let alpha = [0.0, 0.3, 0.6][rng.gen_range(0..3usize)];
        let schedule = StepSchedule::new(eta0, alpha)?;
        let o = rng.gen_range(0..20usize);

        // Half the instances target the claim-(e) mass threshold so its
        // side condition genuinely fires; the rest use short windows.
        let ratio = (16.0 * d4 + 40.0) / lambda_h;
        let n = if rng.gen_bool(0.5) && ratio > 1.0 {
            let needed = 2.0 / lambda_h * ratio.ln();
            let end = schedule.window_end(o as u64, needed * rng.gen_range(1.0..1.5));
            (end as usize).min(o + 20_000)
        } else {
            o + rng.gen_range(1..60usize)
        };
        let etas: Vec<f64> = (1..=n as u64).map(|i| schedule.step_at(i)).collect();
        let report = check_matrix_product_bounds(&h, &etas, o, n)?;
        for claim in &report.claims {
            if !claim.applicable {
                continue;
            }
            match claim.name {
                "c_lower_floor" => c_floor += 1,
                "e_escape_combination" => e_comb += 1,
                _ => {}
            }
            if claim.margin < worst_margin {
                worst_margin = claim.margin;
                worst_claim = claim.name.to_string();
            }
            if !claim.pass {
                all_pass = false;
            }
        }
    }
    Ok(RandomizedBoundsSummary {
        instances,
        all_pass,
        worst_margin,
        worst_claim,
        c_floor_applicable: c_floor,
        e_combination_applicable: e_comb,
    })
}

pub fn run_estimate_constants(
    spec: &EstimateConstantsSpec,
    master_seed: u64,
) -> Result<serde_json::Value> {
    spec.validate()?;
    let problem = spec.problem.build()?;
    let mut rng = aux_stream(master_seed, 0xEC0);
    let calib = if spec.calibrate {
        CalibratedC::calibrate(
            problem.as_ref(),
            spec.gamma,
            spec.samples,
            spec.points,
            &mut rng,
        )?
    } else {
        CalibratedC::family_default(problem.name())
    };
    let analytic = problem.analytic_constants(spec.gamma, &calib)?;
    let empirical = empirical_constants(
        problem.as_ref(),
        spec.samples,
        spec.points,
        spec.gamma,
        &mut rng,
    )?;
    let dominance = dominance_report(&empirical, &analytic);
    let all_dominated = dominance.all_dominated();
    Ok(json!({
        "problem": problem.name(),
        "gamma": spec.gamma,
        "calibration": calib,
        "analytic": analytic,
        "empirical": empirical,
        "dominance": dominance,
        "all_dominated": all_dominated,
        "assumption_violations": analytic.assumption_violations(problem.dim()),
    }))
}
