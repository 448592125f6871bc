use crate::error::{Error, Result};

use super::Matrix;

/// Eigenvalue floor used when projecting estimated correlation matrices.
pub const DEFAULT_EIG_FLOOR: f64 = 1e-6;

/// Lower Cholesky factor `L` with `m = L·Lᵀ`.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::shape("square matrix", format!("{}x{}", m.rows(), m.cols())));
    }
    let scale = m.max_abs().max(1.0);
    if !m.is_symmetric(1e-10 * scale) {
        return Err(Error::DegenerateData("cholesky input is not symmetric".into()));
    }
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// `ln det(L·Lᵀ)` from a Cholesky factor.
pub fn chol_log_det(chol: &Matrix) -> f64 {
    2.0 * chol.diag().iter().map(|d| d.ln()).sum::<f64>()
}

/// Solves `L·z = b` for lower-triangular `L`.
pub fn solve_lower(chol: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = chol.rows();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= chol[(i, k)] * z[k];
        }
        z[i] = s / chol[(i, i)];
    }
    z
}

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascending, the
/// matching eigenvectors are the columns of the returned matrix.
pub fn symmetric_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = nalgebra::SymmetricEigen::new(m.to_nalgebra());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(m.rows(), m.cols(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Projects a symmetric matrix onto correlation matrices whose spectrum is
/// bounded below by `eig_floor`.
///
/// Each pass symmetrizes, clips eigenvalues at the floor and rescales to a
/// unit diagonal. Rescaling can push a clipped eigenvalue slightly back under
/// the floor, so passes repeat until it holds (one pass for the near-valid
/// inputs seen in practice). Inputs that already satisfy the constraints come
/// back unchanged, which makes the projection idempotent.
pub fn nearest_correlation(m: &Matrix, eig_floor: f64) -> Matrix {
    assert!(m.is_square(), "nearest_correlation needs a square matrix");
    let n = m.rows();
    let accept = eig_floor * (1.0 - 1e-6);
    let mut cur = m.symmetrize();
    for _ in 0..64 {
        let (values, vectors) = symmetric_eigen(&cur);
        let unit_diag = cur.diag().iter().all(|d| (d - 1.0).abs() <= 1e-12);
        if unit_diag && values.first().is_none_or(|&v| v >= accept) {
            break;
        }
        let clipped: Vec<f64> = values.iter().map(|&v| v.max(eig_floor)).collect();
        let mut rebuilt = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..n).map(|k| vectors[(i, k)] * clipped[k] * vectors[(j, k)]).sum();
                rebuilt[(i, j)] = s;
                rebuilt[(j, i)] = s;
            }
        }
        let scale: Vec<f64> = rebuilt.diag().iter().map(|d| d.sqrt().recip()).collect();
        cur = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rebuilt[(i, j)] * (scale[i] * scale[j]) });
    }
    cur
}

/// `ln Σ exp(vᵢ)`, stable for large magnitudes.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(logsumexp_unchecked(v))
}

pub(crate) fn logsumexp_unchecked(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() || max == f64::INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-density of `N(mean, L·Lᵀ)` at `x`.
pub fn mvn_log_density(x: &[f64], mean: &[f64], chol: &Matrix) -> f64 {
    let d = x.len();
    let centered: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let z = solve_lower(chol, &centered);
    let quad: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + chol_log_det(chol) + quad)
}
