use crate::error::{Error, Result};
use crate::ndmath::{Matrix, Rng};
use crate::synth::PairedDataset;

/// Disjoint train / validation / evaluation partition of the pairs.
#[derive(Clone, Debug)]
pub struct DataSplit {
    pub train: PairedDataset,
    pub validation: PairedDataset,
    pub evaluation: PairedDataset,
}

impl DataSplit {
    /// Random partition; the evaluation and validation sizes are
    /// `floor(n·fraction)`, training keeps the rest.
    pub fn new(ds: &PairedDataset, validation_fraction: f64, evaluation_fraction: f64, rng: &mut Rng) -> Result<Self> {
        let n = ds.n();
        let n_eval = (n as f64 * evaluation_fraction).floor() as usize;
        let n_val = (n as f64 * validation_fraction).floor() as usize;
        if n_eval == 0 {
            return Err(Error::EmptyEvaluationSet);
        }
        if n_val < 2 || n_eval + n_val + 2 > n {
            return Err(Error::TooFewSamples { needed: n_eval + n_val + 2, got: n });
        }
        let perm = rng.permutation(n);
        let (eval_idx, rest) = perm.split_at(n_eval);
        let (val_idx, train_idx) = rest.split_at(n_val);
        Ok(DataSplit { train: ds.select(train_idx), validation: ds.select(val_idx), evaluation: ds.select(eval_idx) })
    }

    /// Applies `f` to every part.
    pub fn map(self, f: impl Fn(PairedDataset) -> PairedDataset) -> DataSplit {
        DataSplit { train: f(self.train), validation: f(self.validation), evaluation: f(self.evaluation) }
    }
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &Matrix) -> Result<Self> {
        let n = m.rows();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        let mut mean = vec![0.0; m.cols()];
        let mut scale = vec![0.0; m.cols()];
        for j in 0..m.cols() {
            let col = m.column(j);
            let mu = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64;
            if var.is_nan() || var <= 0.0 || var.is_infinite() {
                return Err(Error::DegenerateDimension(j));
            }
            mean[j] = mu;
            scale[j] = var.sqrt().recip();
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn identity(cols: usize) -> Self {
        Standardizer { mean: vec![0.0; cols], scale: vec![1.0; cols] }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        Matrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] - self.mean[j]) * self.scale[j])
    }

    /// Standardizes the joint columns `[x, y]` of a dataset.
    pub fn apply_pairs(&self, ds: &PairedDataset) -> PairedDataset {
        PairedDataset::from_joint(&self.apply(&ds.joint()), ds.dx()).expect("same split")
    }
}

/// Rows `[x_i, y_j]` for every `(i, j)` in `pairs`.
pub(crate) fn gather_pairs(ds: &PairedDataset, pairs: impl Iterator<Item = (usize, usize)>) -> Matrix {
    let (dx, dy) = (ds.dx(), ds.dy());
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, j) in pairs {
        data.extend_from_slice(ds.x().row(i));
        data.extend_from_slice(ds.y().row(j));
        rows += 1;
    }
    Matrix::new(rows, dx + dy, data).expect("finite data")
}

/// Joint rows `[x_i, y_π(i)]` for a uniform permutation `π`.
pub(crate) fn shuffled_pairs(ds: &PairedDataset, rng: &mut Rng) -> Matrix {
    let perm = rng.permutation(ds.n());
    gather_pairs(ds, perm.into_iter().enumerate())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(n: usize) -> PairedDataset {
        PairedDataset::new(Matrix::from_fn(n, 1, |i, _| i as f64), Matrix::from_fn(n, 2, |i, j| (i * 10 + j) as f64))
            .unwrap()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let s = DataSplit::new(&ds(100), 0.1, 0.1, &mut Rng::new(1)).unwrap();
        assert_eq!((s.train.n(), s.validation.n(), s.evaluation.n()), (80, 10, 10));
        let mut all: Vec<f64> =
            [&s.train, &s.validation, &s.evaluation].iter().flat_map(|p| p.x().data().to_vec()).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..100).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_tiny_inputs() {
        assert!(matches!(DataSplit::new(&ds(5), 0.1, 0.1, &mut Rng::new(1)), Err(Error::EmptyEvaluationSet)));
        assert!(DataSplit::new(&ds(12), 0.1, 0.1, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn standardizer_moments() {
        let m = Matrix::from_fn(1000, 2, |i, j| (i as f64).sin() * (j + 1) as f64 * 3.0 + 7.0);
        let s = Standardizer::fit(&m).unwrap();
        let z = s.apply(&m);
        for j in 0..2 {
            let col = z.column(j);
            let mu = col.iter().sum::<f64>() / 1000.0;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 999.0;
            assert!(mu.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
        let flat = Matrix::from_fn(10, 1, |_, _| 4.0);
        assert!(matches!(Standardizer::fit(&flat), Err(Error::DegenerateDimension(0))));
    }

    #[test]
    fn shuffled_pairs_keep_x_order() {
        let d = ds(20);
        let m = shuffled_pairs(&d, &mut Rng::new(2));
        assert_eq!(m.column(0), d.x().column(0));
        let mut ys = m.column(1);
        ys.sort_by(f64::total_cmp);
        assert_eq!(ys, d.y().column(0));
    }
}
