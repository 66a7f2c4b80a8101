//! Independent-oracle checks: a hand-rolled SGLD loop that must reproduce
//! the trajectory runner bit for bit, an inertia-bisection eigensolver that
//! must agree with the production smallest-eigenvalue routine, and the
//! per-step noise-scale contracts of the steppers.

use langevin_lab::dynamics::{run, DynamicsConfig, Method};
use langevin_lab::linalg;
use langevin_lab::problems::{LinearRegressionProblem, Problem, QuadraticSaddle};
use langevin_lab::rng::{aux_stream, replica_streams};
use langevin_lab::schedule::StepSchedule;
use langevin_lab::stationarity::min_eig;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

/// Duplicate-implementation oracle: a straightforward loop with the same
/// stream discipline (gradient draws from the even stream in coordinate
/// order, then the model noise, then the Langevin noise from the odd
/// stream) must reproduce `run` exactly.
#[test]
fn sgld_matches_straightforward_reimplementation() {
    let d = 5usize;
    let a = DMatrix::<f64>::identity(d, d);
    let x_star = DVector::from_fn(d, |i, _| 0.2 * (i as f64) - 0.3);
    let problem = LinearRegressionProblem::new(a, x_star.clone()).unwrap();

    // First-order-prescription-compliant parameters at eps = 0.5, rho = 0.3:
    // eta0 below 1/(6 C2) with C2 = |A| = 1, delta0 at its cap.
    let eta0 = 1.0 / 36.0;
    let delta0 = 0.5 * 0.3f64.sqrt() / (2.0 * (3.0 * d as f64).sqrt());
    let schedule = StepSchedule::new(eta0, 0.0).unwrap();
    let cfg = DynamicsConfig {
        method: Method::Sgld,
        delta0,
        schedule,
        max_iters: 400,
        seed: 555,
    };
    let replica = 3u64;
    let x0 = DVector::from_element(d, 1.0);
    let traj = run(&problem, &cfg, &x0, replica, Some(1), |_, _| false).unwrap();

    // Independent loop.
    let mut streams = replica_streams(cfg.seed, replica);
    let mut x = x0.clone();
    for n in 0..cfg.max_iters {
        let eta = eta0; // constant schedule
        let a_vec = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut streams.grad));
        let eps: f64 = StandardNormal.sample(&mut streams.grad);
        let b = a_vec.dot(&x_star) + eps;
        let residual = a_vec.dot(&x) - b;
        let grad = &a_vec * residual;
        let noise_scale = delta0 * eta.sqrt();
        for i in 0..d {
            let zeta: f64 = StandardNormal.sample(&mut streams.noise);
            x[i] += -eta * grad[i] + noise_scale * zeta;
        }
        let (idx, stored) = &traj.iterates[(n + 1) as usize];
        assert_eq!(*idx, n + 1);
        assert_eq!(
            x, *stored,
            "oracle loop diverged from the runner at step {n}"
        );
    }

    // Running minimum of the gradient norm decreases over the run.
    let first = traj.samples.first().unwrap().grad_norm;
    let min = traj
        .samples
        .iter()
        .map(|s| s.grad_norm)
        .fold(f64::INFINITY, f64::min);
    assert!(min < first);
}

/// Eigenvalue-count oracle by Sylvester inertia: the number of negative
/// pivots of the symmetric elimination of `H - t I` equals the number of
/// eigenvalues below `t`.
fn eigs_below(h: &DMatrix<f64>, t: f64) -> Option<usize> {
    let n = h.nrows();
    let mut m = h.clone();
    for i in 0..n {
        m[(i, i)] -= t;
    }
    let mut negatives = 0;
    for k in 0..n {
        let pivot = m[(k, k)];
        if pivot.abs() < 1e-12 {
            return None; // t is (numerically) an eigenvalue; caller nudges
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in (k + 1)..n {
            let factor = m[(i, k)] / pivot;
            for j in (k + 1)..n {
                m[(i, j)] -= factor * m[(k, j)];
            }
        }
    }
    Some(negatives)
}

fn min_eig_bisection(h: &DMatrix<f64>) -> f64 {
    let scale = linalg::sym_opnorm(h).max(1.0);
    let mut lo = -1.5 * scale;
    let mut hi = 1.5 * scale;
    for _ in 0..200 {
        let mut mid = 0.5 * (lo + hi);
        let mut count = eigs_below(h, mid);
        let mut nudge = 1e-13 * scale;
        while count.is_none() {
            mid += nudge;
            nudge *= 2.0;
            count = eigs_below(h, mid);
        }
        if count.unwrap() >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn min_eig_matches_inertia_bisection_oracle() {
    let mut rng = aux_stream(77, 0x0E);
    for trial in 0..20 {
        let n = 20;
        let spectrum: Vec<f64> = (0..n)
            .map(|_| 6.0 * rand::Rng::gen::<f64>(&mut rng) - 3.0)
            .collect();
        let h = linalg::symmetric_with_spectrum(&spectrum, &mut rng);
        let fast = min_eig(&h).unwrap();
        let oracle = min_eig_bisection(&h);
        let scale = linalg::sym_opnorm(&h);
        assert!(
            (fast - oracle).abs() <= 1e-8 * scale,
            "trial {trial}: min_eig {fast} vs bisection {oracle}"
        );
        // and against the spectrum the matrix was built from
        let truth = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((fast - truth).abs() <= 1e-9 * scale);
    }
}

/// Similarity invariance: `min_eig(Q D Q^T) = min(diag(D))` for random
/// orthogonal `Q`.
#[test]
fn min_eig_similarity_invariance() {
    let mut rng = aux_stream(78, 0x0E);
    for _ in 0..30 {
        let n = 3 + (rand::Rng::gen::<u64>(&mut rng) % 10) as usize;
        let spectrum: Vec<f64> = (0..n)
            .map(|_| 8.0 * rand::Rng::gen::<f64>(&mut rng) - 4.0)
            .collect();
        let h = linalg::symmetric_with_spectrum(&spectrum, &mut rng);
        let truth = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
        let got = min_eig(&h).unwrap();
        assert!((got - truth).abs() <= 1e-8 * linalg::sym_opnorm(&h).max(1.0));
    }
}

/// Noise-scale contract: with the gradient frozen at zero (H = 0 quadratic)
/// and no model noise, 1e5 single SGLD steps have displacement covariance
/// `delta0^2 eta I` within 5% in operator norm, and the matching PGD steps
/// are exactly `sqrt(eta)` times smaller in standard deviation.
#[test]
fn per_step_noise_scale_contract() {
    let d = 2usize;
    let problem = QuadraticSaddle::new(DMatrix::zeros(d, d), 0.0).unwrap();
    let eta = 0.04;
    let delta0 = 0.7;
    let schedule = StepSchedule::new(eta, 0.0).unwrap();
    let x = DVector::<f64>::zeros(d);
    let n = 100_000u64;

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut pgd_sq = 0.0f64;
    let mut sgld_sq = 0.0f64;
    for replica in 0..n {
        let mut s1 = replica_streams(9000, replica);
        let mut s2 = replica_streams(9000, replica);
        let sgld = langevin_lab::dynamics::step(
            Method::Sgld,
            &problem,
            &x,
            0,
            delta0,
            &schedule,
            &mut s1.grad,
            &mut s1.noise,
        )
        .unwrap();
        let pgd = langevin_lab::dynamics::step(
            Method::Pgd,
            &problem,
            &x,
            0,
            delta0,
            &schedule,
            &mut s2.grad,
            &mut s2.noise,
        )
        .unwrap();
        cov += &sgld * sgld.transpose();
        sgld_sq += sgld.norm_squared();
        pgd_sq += pgd.norm_squared();
        // identical zeta streams: the two displacements are proportional
        assert!((pgd - &sgld * eta.sqrt()).norm() < 1e-12);
    }
    cov /= n as f64;
    let target = delta0 * delta0 * eta;
    let diff = &cov - DMatrix::<f64>::identity(d, d) * target;
    let rel = linalg::sym_opnorm(&diff) / target;
    assert!(rel < 0.05, "covariance deviates by {rel:.3} in operator norm");
    let ratio = (pgd_sq / sgld_sq).sqrt();
    assert!((ratio - eta.sqrt()).abs() < 1e-9);
}

/// Coercivity growth inequalities for the factor problems at large radius,
/// with the analytic `c7`/`D7` pair.
#[test]
fn coercivity_spot_checks() {
    use langevin_lab::constants::{coercivity_spot_check, CalibratedC};
    use langevin_lab::problems::{MatrixFactorizationProblem, OnlinePcaProblem};

    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = 1.0;
    m[(1, 1)] = 0.5;
    let mf = MatrixFactorizationProblem::new(m.clone(), 2).unwrap();
    let bundle = mf.analytic_constants(2.0, &CalibratedC::UNIT).unwrap();
    let mut rng = aux_stream(90, 1);
    let violations =
        coercivity_spot_check(&mf, bundle.c7, bundle.d7, 25.0, 1000, &mut rng).unwrap();
    assert_eq!(violations, 0, "factorization coercivity violated");

    let mut mp = DMatrix::zeros(4, 4);
    for (i, v) in [1.0, 0.5, 1.0 / 3.0, 0.25].iter().enumerate() {
        mp[(i, i)] = *v;
    }
    let pca = OnlinePcaProblem::new(mp, 2).unwrap();
    let bundle = pca.analytic_constants(2.0, &CalibratedC::UNIT).unwrap();
    let violations =
        coercivity_spot_check(&pca, bundle.c7, bundle.d7, 25.0, 1000, &mut rng).unwrap();
    assert_eq!(violations, 0, "PCA coercivity violated");
}
