//! Element-wise Gaussian copula fitted by ranks.
//!
//! Each coordinate keeps its sorted observed values; dependence is a
//! correlation matrix over probit-transformed ranks. Samples map Gaussian
//! draws back through the empirical quantile tables, so every sampled
//! value is one of the observed ones.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndmath::{
    chol_log_det, cholesky, nearest_correlation, norm_cdf, norm_quantile, sample_mvn, Matrix, Rng, DEFAULT_EIG_FLOOR,
};
use crate::synth::PairedDataset;

/// Smallest dataset accepted by [`fit_copula`].
pub const MIN_FIT_SAMPLES: usize = 100;

const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CopulaSnapshot", into = "CopulaSnapshot")]
pub struct CopulaModel {
    tables: Vec<Vec<f64>>,
    sigma: Matrix,
    dx: usize,
    chol_joint: Matrix,
    chol_product: Matrix,
}

#[derive(Clone, Serialize, Deserialize)]
struct CopulaSnapshot {
    format_version: u32,
    dx: usize,
    sigma: Matrix,
    tables: Vec<Vec<f64>>,
}

impl From<CopulaModel> for CopulaSnapshot {
    fn from(m: CopulaModel) -> Self {
        CopulaSnapshot { format_version: FORMAT_VERSION, dx: m.dx, sigma: m.sigma, tables: m.tables }
    }
}

impl TryFrom<CopulaSnapshot> for CopulaModel {
    type Error = Error;

    fn try_from(s: CopulaSnapshot) -> Result<Self> {
        if s.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("copula version {} (expected {FORMAT_VERSION})", s.format_version)));
        }
        CopulaModel::from_parts(s.tables, s.sigma, s.dx)
    }
}

impl CopulaModel {
    /// Validates the parts and caches the Cholesky factors used by the
    /// samplers.
    pub fn from_parts(tables: Vec<Vec<f64>>, sigma: Matrix, dx: usize) -> Result<Self> {
        let dim = tables.len();
        if dx == 0 || dx >= dim {
            return Err(Error::DimensionMismatch(format!("x block of {dx} in {dim} coordinates")));
        }
        if sigma.shape() != (dim, dim) {
            return Err(Error::shape(format!("{dim}x{dim} correlation"), format!("{:?}", sigma.shape())));
        }
        if !sigma.is_symmetric(1e-10) || sigma.diag().iter().any(|&v| (v - 1.0).abs() > 1e-10) {
            return Err(Error::Format("sigma is not a correlation matrix".into()));
        }
        for t in &tables {
            if t.is_empty() || t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format("empty or non-finite marginal table".into()));
            }
            if t.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Format("marginal table not sorted".into()));
            }
        }
        let chol_joint = cholesky(&sigma)?;
        let mut chol_product = Matrix::zeros(dim, dim);
        let lx = cholesky(&sigma.block(0, dx, 0, dx))?;
        let ly = cholesky(&sigma.block(dx, dim, dx, dim))?;
        for i in 0..dx {
            for j in 0..=i {
                chol_product[(i, j)] = lx[(i, j)];
            }
        }
        for i in 0..dim - dx {
            for j in 0..=i {
                chol_product[(dx + i, dx + j)] = ly[(i, j)];
            }
        }
        Ok(CopulaModel { tables, sigma, dx, chol_joint, chol_product })
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn dy(&self) -> usize {
        self.tables.len() - self.dx
    }

    pub fn dim(&self) -> usize {
        self.tables.len()
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    /// Sorted observed values of coordinate `j` (x coordinates first).
    pub fn table(&self, j: usize) -> &[f64] {
        &self.tables[j]
    }

    /// Draws `n` rows `[x, y]` from `q(x, y)`.
    pub fn sample_joint(&self, n: usize, rng: &mut Rng) -> Matrix {
        self.sample_with(&self.chol_joint, n, rng)
    }

    /// Draws `n` rows `[x, y]` from `q(x)q(y)`: cross-block correlation
    /// removed, within-block dependence kept.
    pub fn sample_product(&self, n: usize, rng: &mut Rng) -> Matrix {
        self.sample_with(&self.chol_product, n, rng)
    }

    fn sample_with(&self, chol: &Matrix, n: usize, rng: &mut Rng) -> Matrix {
        let mut eps = sample_mvn(rng, &vec![0.0; self.dim()], chol, n);
        for i in 0..n {
            for (v, table) in eps.row_mut(i).iter_mut().zip(&self.tables) {
                *v = rank_map(*v, table);
            }
        }
        eps
    }

    /// MI of the Gaussian copula itself:
    /// `-½·(ln det Σ - ln det Σxx - ln det Σyy)`.
    pub fn gaussian_mi(&self) -> f64 {
        let dim = self.dim();
        let dx = self.dx;
        let lx = cholesky(&self.sigma.block(0, dx, 0, dx)).expect("validated");
        let ly = cholesky(&self.sigma.block(dx, dim, dx, dim)).expect("validated");
        -0.5 * (chol_log_det(&self.chol_joint) - chol_log_det(&lx) - chol_log_det(&ly))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// `table[clamp(⌈n·Φ(eps)⌉, 1, n)]`, 1-indexed.
pub fn rank_map(eps: f64, table: &[f64]) -> f64 {
    let n = table.len();
    let r = (n as f64 * norm_cdf(eps)).ceil();
    let r = if r.is_nan() { 1 } else { (r as usize).clamp(1, n) };
    table[r - 1]
}

/// Average ranks in `1..=n`; ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Gaussian scores `Φ⁻¹(rank / (n + 1))` of one coordinate.
pub fn probit_scores(values: &[f64]) -> Vec<f64> {
    let denom = values.len() as f64 + 1.0;
    average_ranks(values).into_iter().map(|r| norm_quantile(r / denom)).collect()
}

pub fn fit_copula(ds: &PairedDataset) -> Result<CopulaModel> {
    let n = ds.n();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_FIT_SAMPLES, got: n });
    }
    let joint = ds.joint();
    let dim = joint.cols();
    let mut tables = Vec::with_capacity(dim);
    let mut scores = Matrix::zeros(n, dim);
    for j in 0..dim {
        let col = joint.column(j);
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted[0] == sorted[n - 1] {
            return Err(Error::DegenerateDimension(j));
        }
        for (i, s) in probit_scores(&col).into_iter().enumerate() {
            scores[(i, j)] = s;
        }
        tables.push(sorted);
    }
    let mut sigma = scores.transpose().matmul(&scores)?;
    sigma.data_mut().iter_mut().for_each(|v| *v /= n as f64);
    let sigma = nearest_correlation(&sigma.symmetrize(), DEFAULT_EIG_FLOOR);
    CopulaModel::from_parts(tables, sigma, ds.dx())
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut best) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}
