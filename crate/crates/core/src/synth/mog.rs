use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ndmath::{logsumexp_unchecked, norm_log_pdf, Matrix, Rng};

use super::gaussian::check_rho;
use super::PairedDataset;

/// Default Monte Carlo sample count for the mixture MI oracle.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

const MC_CHUNK: usize = 1 << 14;

/// Equally weighted mixture of `M` Gaussians on `[x, y] ∈ R^{2d}`.
///
/// Component `k` has mean `m_k·1` and the sparse covariance of the
/// nonlinear-Gaussian model: unit variances, correlation `ρ_k` between
/// `x_i` and `y_i`, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct MogSpec {
    pub d: usize,
    pub means: Vec<f64>,
    pub rhos: Vec<f64>,
}

impl MogSpec {
    pub fn new(d: usize, means: Vec<f64>, rhos: Vec<f64>) -> Result<Self> {
        let spec = MogSpec { d, means, rhos };
        spec.validate()?;
        Ok(spec)
    }

    /// Five components, offsets `[-0.4, -0.1, 0, 0.1, 0.4]`, dependence
    /// `[0.5, 0.6, 0.7, 0.8, 0.9]`.
    pub fn mog1(d: usize) -> Result<Self> {
        MogSpec::new(d, vec![-0.4, -0.1, 0.0, 0.1, 0.4], vec![0.5, 0.6, 0.7, 0.8, 0.9])
    }

    /// Five components, offsets and dependence both `[-0.2, -0.1, 0, 0.3, 0.4]`.
    pub fn mog2(d: usize) -> Result<Self> {
        let v = vec![-0.2, -0.1, 0.0, 0.3, 0.4];
        MogSpec::new(d, v.clone(), v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::ConfigInvalid("d must be at least 1".into()));
        }
        if self.means.is_empty() || self.means.len() != self.rhos.len() {
            return Err(Error::ConfigInvalid("mixture needs matching, nonempty mean and rho lists".into()));
        }
        self.rhos.iter().try_for_each(|&r| check_rho(r))
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn generate(&self, n: usize, rng: &mut Rng) -> PairedDataset {
        let d = self.d;
        let mut x = Matrix::zeros(n, d);
        let mut y = Matrix::zeros(n, d);
        for i in 0..n {
            let k = rng.below(self.components());
            let (m, rho) = (self.means[k], self.rhos[k]);
            let scale = (1.0 - rho * rho).sqrt();
            for j in 0..d {
                let z1 = rng.standard_normal();
                let z2 = rng.standard_normal();
                x[(i, j)] = m + z1;
                y[(i, j)] = m + rho * z1 + scale * z2;
            }
        }
        PairedDataset::new(x, y).expect("shapes agree")
    }

    /// `(ln p(x,y), ln p(x), ln p(y))` at one point `[x, y]`.
    ///
    /// The diagonal blocks of every component covariance are identities,
    /// so each marginal is an `M`-component mixture of `N(m_k·1, I)`.
    pub fn log_densities_at(&self, point: &[f64]) -> (f64, f64, f64) {
        let d = self.d;
        let (x, y) = point.split_at(d);
        let log_m = (self.components() as f64).ln();
        let mut joint = Vec::with_capacity(self.components());
        let mut mx = Vec::with_capacity(self.components());
        let mut my = Vec::with_capacity(self.components());
        for (&m, &rho) in self.means.iter().zip(&self.rhos) {
            let one_minus = 1.0 - rho * rho;
            let pair_norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * one_minus.ln();
            let (mut lj, mut lx, mut ly) = (0.0, 0.0, 0.0);
            for i in 0..d {
                let a = x[i] - m;
                let b = y[i] - m;
                lj += pair_norm - (a * a - 2.0 * rho * a * b + b * b) / (2.0 * one_minus);
                lx += norm_log_pdf(a);
                ly += norm_log_pdf(b);
            }
            joint.push(lj - log_m);
            mx.push(lx - log_m);
            my.push(ly - log_m);
        }
        (logsumexp_unchecked(&joint), logsumexp_unchecked(&mx), logsumexp_unchecked(&my))
    }

    pub fn log_densities(&self, points: &Matrix) -> Result<Vec<(f64, f64, f64)>> {
        if points.cols() != 2 * self.d {
            return Err(Error::DimensionMismatch(format!("points need {} columns, got {}", 2 * self.d, points.cols())));
        }
        Ok(points.iter_rows().map(|p| self.log_densities_at(p)).collect())
    }

    /// Monte Carlo MI `E[ln p(x,y) - ln p(x) - ln p(y)]` over `samples`
    /// joint draws, returned with its standard error.
    ///
    /// Draws are split into fixed-size chunks with their own sub-streams,
    /// so the value does not depend on `exec` or the thread count.
    pub fn true_mi(&self, samples: usize, rng: &Rng, exec: Execution) -> Result<(f64, f64)> {
        if samples < 1000 {
            return Err(Error::TooFewSamples { needed: 1000, got: samples });
        }
        let chunks = samples.div_ceil(MC_CHUNK);
        let parts = exec.map(chunks, |c| {
            let mut sub = rng.split(c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let ds = self.generate(len, &mut sub);
            let mut stats = Moments::default();
            for i in 0..len {
                let mut point = Vec::with_capacity(2 * self.d);
                point.extend_from_slice(ds.x().row(i));
                point.extend_from_slice(ds.y().row(i));
                let (lj, lx, ly) = self.log_densities_at(&point);
                stats.push(lj - lx - ly);
            }
            stats
        });
        let total = parts.into_iter().fold(Moments::default(), Moments::merge);
        let var = total.m2 / (total.n - 1.0);
        Ok((total.mean, (var / total.n).sqrt()))
    }
}

/// Running mean and sum of squared deviations, mergeable in order.
#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}
