//! Symmetric-matrix helpers: eigendecomposition, smallest eigenvalues,
//! operator norms, and seeded random orthogonal/symmetric matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Matrices at or below this order use a dense eigendecomposition; larger
/// ones fall back to the shifted power iteration in [`min_eig_iterative`].
pub const DENSE_EIG_LIMIT: usize = 512;

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Max entry magnitude, used to scale symmetry checks.
fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Rejects matrices whose asymmetry defect exceeds `SYMMETRY_TOLERANCE * |H|_inf`.
pub fn check_symmetric(h: &DMatrix<f64>) -> Result<()> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.ncols(),
        });
    }
    let scale = max_abs(h).max(1e-300);
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            defect = defect.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    let tolerance = SYMMETRY_TOLERANCE * scale;
    if defect > tolerance {
        return Err(Error::AsymmetricMatrix { defect, tolerance });
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, ascending. Does not validate symmetry.
pub fn sym_eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = h
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Full symmetric eigendecomposition: (eigenvalues ascending, matching eigenvectors as columns).
pub fn sym_eigen(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let decomp = h.clone().symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomp.eigenvalues[a]
            .partial_cmp(&decomp.eigenvalues[b])
            .unwrap()
    });
    let vals: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &decomp.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Spectral norm of a symmetric matrix.
pub fn sym_opnorm(h: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(h)
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Validates symmetry, then uses the dense decomposition up to
/// [`DENSE_EIG_LIMIT`] and a Gershgorin-shifted power iteration above it.
pub fn min_eig(h: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(h)?;
    if h.nrows() <= DENSE_EIG_LIMIT {
        Ok(sym_eigenvalues(h)[0])
    } else {
        min_eig_iterative(h, 1e-8, 10_000)
    }
}

/// Upper bound on the spectrum by Gershgorin discs.
pub fn gershgorin_upper(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    let mut bound = f64::NEG_INFINITY;
    for i in 0..n {
        let mut radius = 0.0;
        for j in 0..n {
            if i != j {
                radius += h[(i, j)].abs();
            }
        }
        bound = bound.max(h[(i, i)] + radius);
    }
    bound
}

/// Shifted power iteration for the smallest eigenvalue: run the power method
/// on `c*I - H` with `c` the Gershgorin upper bound, so the dominant
/// eigenvalue of the shifted matrix is `c - lambda_min(H)`.
///
/// Converges when the Rayleigh quotient stabilizes to relative `tol` of the
/// shifted spectral scale; the first iterate to satisfy the test wins.
pub fn min_eig_iterative(h: &DMatrix<f64>, tol: f64, max_iters: usize) -> Result<f64> {
    check_symmetric(h)?;
    let n = h.nrows();
    let c = gershgorin_upper(h) + 1.0;
    let scale = max_abs(h).max(1.0);
    // Deterministic start vector with all Fourier modes populated.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i as f64) + 0.5).sin() * 0.5);
    v /= v.norm();
    let mut prev = f64::INFINITY;
    for _ in 0..max_iters {
        let mut w = h * &v;
        w.iter_mut().zip(v.iter()).for_each(|(wi, vi)| {
            *wi = c * vi - *wi;
        });
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(c); // H = c*I on the start vector's span
        }
        w /= norm;
        let hv = h * &w;
        let rayleigh = w.dot(&hv);
        if (rayleigh - prev).abs() <= tol * scale {
            return Ok(rayleigh);
        }
        prev = rayleigh;
        v = w;
    }
    Ok(prev)
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix,
/// with the sign convention fixed so the distribution is Haar.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r_diag: Vec<f64> = (0..n).map(|i| qr.r()[(i, i)]).collect();
    let mut q = qr.q();
    for (j, d) in r_diag.iter().enumerate() {
        if *d < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

/// Symmetric matrix with the given spectrum in a seeded random orthogonal basis.
pub fn symmetric_with_spectrum<R: Rng + ?Sized>(spectrum: &[f64], rng: &mut R) -> DMatrix<f64> {
    let n = spectrum.len();
    let q = random_orthogonal(n, rng);
    let d = DMatrix::from_diagonal(&DVector::from_row_slice(spectrum));
    let m = &q * d * q.transpose();
    // Rounding can leave a ~1e-16 asymmetry; symmetrize so downstream checks pass.
    0.5 * (&m + m.transpose())
}
