use crate::copula::CopulaModel;
use crate::error::{Error, Result};
use crate::ndmath::{cholesky, sample_mvn, symmetric_eigen, Matrix, Rng};
use crate::neural::{softmax_xent, softmax_xent_backward, train, AdamState, Mlp, TrainOutcome, TrainingTask};
use crate::synth::PairedDataset;

use super::bounds::{JOINT, PRODUCT, REF_JOINT, REF_PRODUCT};
use super::data::{gather_pairs, shuffled_pairs};
use super::EstimatorConfig;

/// Source of the two reference classes `q(x, y)` and `q(x)q(y)`.
pub trait ReferenceSampler {
    fn sample_joint(&self, n: usize, rng: &mut Rng) -> Matrix;
    fn sample_product(&self, n: usize, rng: &mut Rng) -> Matrix;
}

impl ReferenceSampler for CopulaModel {
    fn sample_joint(&self, n: usize, rng: &mut Rng) -> Matrix {
        CopulaModel::sample_joint(self, n, rng)
    }

    fn sample_product(&self, n: usize, rng: &mut Rng) -> Matrix {
        CopulaModel::sample_product(self, n, rng)
    }
}

/// Moment-matched Gaussian references: `N(μ, Σ)` and `N(μ, Σ)` with the
/// cross-covariance block zeroed. Marginals are Gaussian whatever the data.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianReference {
    mean: Vec<f64>,
    chol_joint: Matrix,
    chol_product: Matrix,
}

impl GaussianReference {
    pub fn fit(ds: &PairedDataset) -> Result<Self> {
        let joint = ds.joint();
        let (mean, cov) = moments(&joint)?;
        let dx = ds.dx();
        let dim = joint.cols();
        let mut product = cov.clone();
        for i in 0..dx {
            for j in dx..dim {
                product[(i, j)] = 0.0;
                product[(j, i)] = 0.0;
            }
        }
        Ok(GaussianReference { mean, chol_joint: floored_cholesky(&cov)?, chol_product: floored_cholesky(&product)? })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

impl ReferenceSampler for GaussianReference {
    fn sample_joint(&self, n: usize, rng: &mut Rng) -> Matrix {
        sample_mvn(rng, &self.mean, &self.chol_joint, n)
    }

    fn sample_product(&self, n: usize, rng: &mut Rng) -> Matrix {
        sample_mvn(rng, &self.mean, &self.chol_product, n)
    }
}

/// Column means and the unbiased covariance of the rows of `m`.
pub fn moments(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.rows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = m.cols();
    let mean: Vec<f64> = (0..d).map(|j| m.column(j).iter().sum::<f64>() / n as f64).collect();
    let centred = Matrix::from_fn(n, d, |i, j| m[(i, j)] - mean[j]);
    let mut cov = centred.transpose().matmul(&centred)?;
    cov.data_mut().iter_mut().for_each(|v| *v /= (n - 1) as f64);
    Ok((mean, cov.symmetrize()))
}

/// Cholesky factor of `cov`, or of its eigenvalue-floored projection when
/// `cov` is numerically singular.
fn floored_cholesky(cov: &Matrix) -> Result<Matrix> {
    if let Ok(l) = cholesky(cov) {
        return Ok(l);
    }
    let (values, vectors) = symmetric_eigen(cov);
    let top = values.last().copied().unwrap_or(0.0);
    if top.is_nan() || top <= 0.0 {
        return Err(Error::SingularCovariance);
    }
    log::warn!("reference covariance is singular; flooring its spectrum");
    let floor = top * 1e-6;
    let n = cov.rows();
    let rebuilt =
        Matrix::from_fn(n, n, |i, j| (0..n).map(|k| vectors[(i, k)] * values[k].max(floor) * vectors[(j, k)]).sum());
    cholesky(&rebuilt.symmetrize()).map_err(|_| Error::SingularCovariance)
}

/// The four-class training problem: data pairs, reference joint,
/// reference product and shuffled data pairs, in equal shares.
///
/// Data classes cycle through the training split without replacement each
/// epoch; reference classes are drawn fresh for every batch.
pub struct MultinomialTask<'a, R: ReferenceSampler + ?Sized> {
    train: &'a PairedDataset,
    reference: &'a R,
    per_class: usize,
    joint_order: Vec<usize>,
    x_order: Vec<usize>,
    y_order: Vec<usize>,
    val_inputs: Matrix,
    val_labels: Vec<usize>,
}

impl<'a, R: ReferenceSampler + ?Sized> MultinomialTask<'a, R> {
    /// The validation set holds every validation pair, the same number of
    /// shuffled pairs and one fixed draw of each reference class.
    pub fn new(
        train: &'a PairedDataset,
        validation: &PairedDataset,
        reference: &'a R,
        batch_size: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if !batch_size.is_multiple_of(4) || batch_size == 0 {
            return Err(Error::ConfigInvalid(format!("batch size {batch_size} is not four equal class shares")));
        }
        if train.dx() != validation.dx() || train.dy() != validation.dy() {
            return Err(Error::DimensionMismatch("training and validation splits disagree".into()));
        }
        if train.n() < 2 || validation.n() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: train.n().min(validation.n()) });
        }
        let m = validation.n();
        let val_inputs = validation
            .joint()
            .vstack(&reference.sample_joint(m, rng))?
            .vstack(&reference.sample_product(m, rng))?
            .vstack(&shuffled_pairs(validation, rng))?;
        let val_labels =
            [JOINT, REF_JOINT, REF_PRODUCT, PRODUCT].iter().flat_map(|&c| std::iter::repeat_n(c, m)).collect();
        Ok(MultinomialTask {
            train,
            reference,
            per_class: batch_size / 4,
            joint_order: (0..train.n()).collect(),
            x_order: (0..train.n()).collect(),
            y_order: (0..train.n()).collect(),
            val_inputs,
            val_labels,
        })
    }

    fn batch(&self, index: usize, rng: &mut Rng) -> Result<(Matrix, Vec<usize>)> {
        let n = self.train.n();
        let k = self.per_class;
        let at = |order: &Vec<usize>, j: usize| order[(index * k + j) % n];
        let joint = gather_pairs(self.train, (0..k).map(|j| (at(&self.joint_order, j), at(&self.joint_order, j))));
        let shuffled = gather_pairs(self.train, (0..k).map(|j| (at(&self.x_order, j), at(&self.y_order, j))));
        let inputs = joint
            .vstack(&self.reference.sample_joint(k, rng))?
            .vstack(&self.reference.sample_product(k, rng))?
            .vstack(&shuffled)?;
        let labels = [JOINT, REF_JOINT, REF_PRODUCT, PRODUCT].iter().flat_map(|&c| std::iter::repeat_n(c, k)).collect();
        Ok((inputs, labels))
    }
}

impl<R: ReferenceSampler + ?Sized> TrainingTask for MultinomialTask<'_, R> {
    fn batches_per_epoch(&self) -> usize {
        (self.train.n() / self.per_class).max(1)
    }

    fn begin_epoch(&mut self, rng: &mut Rng) {
        let n = self.train.n();
        self.joint_order = rng.permutation(n);
        self.x_order = rng.permutation(n);
        self.y_order = rng.permutation(n);
    }

    fn batch_gradient(&mut self, net: &Mlp, index: usize, rng: &mut Rng) -> Result<(f64, Vec<f64>)> {
        let (inputs, labels) = self.batch(index, rng)?;
        softmax_xent_backward(net, &inputs, &labels)
    }

    fn validation_loss(&self, net: &Mlp) -> Result<f64> {
        softmax_xent(&net.forward(&self.val_inputs)?, &self.val_labels)
    }
}

/// Trains a four-logit classifier against `reference`.
pub fn train_multinomial<R: ReferenceSampler + ?Sized>(
    train_split: &PairedDataset,
    validation: &PairedDataset,
    reference: &R,
    cfg: &EstimatorConfig,
    init_rng: &mut Rng,
    rng: &mut Rng,
) -> Result<TrainOutcome> {
    let mut task = MultinomialTask::new(train_split, validation, reference, cfg.batch_size, rng)?;
    let net = Mlp::new(cfg.mlp(train_split.dx() + train_split.dy(), 4), init_rng)?;
    let adam = AdamState::new(net.num_params(), cfg.learning_rate, cfg.weight_decay);
    train(net, &mut task, &cfg.schedule(), adam, rng)
}
