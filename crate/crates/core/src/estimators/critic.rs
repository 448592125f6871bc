use crate::error::{Error, Result};
use crate::ndmath::{logsumexp_unchecked, Matrix, Rng};
use crate::neural::{train, AdamState, Mlp, TrainOutcome, TrainingTask};
use crate::synth::PairedDataset;

use super::bounds::{dv_bound, nwj_bound};
use super::data::{gather_pairs, shuffled_pairs};
use super::EstimatorConfig;

/// Variational lower bounds driven by a scalar critic `f(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticBound {
    Dv,
    Nwj,
}

impl CriticBound {
    pub fn value(self, f_joint: &[f64], f_product: &[f64]) -> Result<f64> {
        match self {
            CriticBound::Dv => dv_bound(f_joint, f_product),
            CriticBound::Nwj => nwj_bound(f_joint, f_product),
        }
    }

    /// Gradient of the bound with respect to each critic value.
    fn gradients(self, f_joint: &[f64], f_product: &[f64]) -> (f64, Vec<f64>) {
        let a = 1.0 / f_joint.len() as f64;
        let g = match self {
            CriticBound::Dv => {
                let lse = logsumexp_unchecked(f_product);
                f_product.iter().map(|f| -(f - lse).exp()).collect()
            }
            CriticBound::Nwj => {
                let b = 1.0 / f_product.len() as f64;
                f_product.iter().map(|f| -b * (f - 1.0).exp()).collect()
            }
        };
        (a, g)
    }
}

pub fn critic_values(net: &Mlp, pairs: &Matrix) -> Result<Vec<f64>> {
    Ok(net.forward(pairs)?.into_data())
}

/// Half of each batch is joint pairs, half shuffled pairs, both cycling
/// through the training split without replacement.
pub struct CriticTask<'a> {
    bound: CriticBound,
    train: &'a PairedDataset,
    half: usize,
    joint_order: Vec<usize>,
    x_order: Vec<usize>,
    y_order: Vec<usize>,
    val_joint: Matrix,
    val_product: Matrix,
}

impl<'a> CriticTask<'a> {
    pub fn new(
        bound: CriticBound,
        train: &'a PairedDataset,
        validation: &PairedDataset,
        batch_size: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if batch_size < 2 || !batch_size.is_multiple_of(2) {
            return Err(Error::ConfigInvalid(format!("batch size {batch_size} is not two equal halves")));
        }
        if train.n() < 2 || validation.n() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: train.n().min(validation.n()) });
        }
        Ok(CriticTask {
            bound,
            train,
            half: batch_size / 2,
            joint_order: (0..train.n()).collect(),
            x_order: (0..train.n()).collect(),
            y_order: (0..train.n()).collect(),
            val_joint: validation.joint(),
            val_product: shuffled_pairs(validation, rng),
        })
    }
}

impl TrainingTask for CriticTask<'_> {
    fn batches_per_epoch(&self) -> usize {
        (self.train.n() / self.half).max(1)
    }

    fn begin_epoch(&mut self, rng: &mut Rng) {
        let n = self.train.n();
        self.joint_order = rng.permutation(n);
        self.x_order = rng.permutation(n);
        self.y_order = rng.permutation(n);
    }

    fn batch_gradient(&mut self, net: &Mlp, index: usize, _rng: &mut Rng) -> Result<(f64, Vec<f64>)> {
        let n = self.train.n();
        let k = self.half;
        let at = |order: &Vec<usize>, j: usize| order[(index * k + j) % n];
        let joint = gather_pairs(self.train, (0..k).map(|j| (at(&self.joint_order, j), at(&self.joint_order, j))));
        let product = gather_pairs(self.train, (0..k).map(|j| (at(&self.x_order, j), at(&self.y_order, j))));
        let inputs = joint.vstack(&product)?;
        let (cache, out) = net.forward_cached(&inputs);
        let f = out.data();
        let (fj, fp) = f.split_at(k);
        let loss = -self.bound.value(fj, fp)?;
        let (dj, dp) = self.bound.gradients(fj, fp);
        // minimize the negated bound
        let mut dout: Vec<f64> = vec![-dj; k];
        dout.extend(dp.into_iter().map(|g| -g));
        let dout = Matrix::new(2 * k, 1, dout)?;
        Ok((loss, net.backward(&inputs, &cache, &dout)))
    }

    fn validation_loss(&self, net: &Mlp) -> Result<f64> {
        let fj = critic_values(net, &self.val_joint)?;
        let fp = critic_values(net, &self.val_product)?;
        Ok(-self.bound.value(&fj, &fp)?)
    }
}

/// Upper limit on rows per forward pass when scoring `B²` pairs.
const PAIR_ROWS_PER_PASS: usize = 8192;

/// Mean InfoNCE loss `mean_i [LSE_j f(x_i, y_j) - f(x_i, y_i)]` over one
/// contrastive batch, optionally with its parameter gradient.
fn infonce_batch(net: &Mlp, ds: &PairedDataset, idx: &[usize], with_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    let b = idx.len();
    let rows_per_pass = (PAIR_ROWS_PER_PASS / b).max(1);
    let mut loss = 0.0;
    let mut grads = with_grad.then(|| vec![0.0; net.num_params()]);
    for start in (0..b).step_by(rows_per_pass) {
        let end = (start + rows_per_pass).min(b);
        let pairs = gather_pairs(ds, (start..end).flat_map(|i| idx.iter().map(move |&j| (idx[i], j))));
        let (cache, scores) = net.forward_cached(&pairs);
        let s = scores.data();
        let mut dscores = Matrix::zeros(pairs.rows(), 1);
        for (r, i) in (start..end).enumerate() {
            let row = &s[r * b..(r + 1) * b];
            let lse = logsumexp_unchecked(row);
            loss += lse - row[i];
            if grads.is_some() {
                let d = &mut dscores.data_mut()[r * b..(r + 1) * b];
                for (dv, &v) in d.iter_mut().zip(row) {
                    *dv = (v - lse).exp() / b as f64;
                }
                d[i] -= 1.0 / b as f64;
            }
        }
        if let Some(g) = grads.as_mut() {
            for (acc, v) in g.iter_mut().zip(net.backward(&pairs, &cache, &dscores)) {
                *acc += v;
            }
        }
    }
    Ok((loss / b as f64, grads))
}

/// Chunks of `batch` consecutive rows; a dataset smaller than one batch
/// forms a single short chunk.
fn contrastive_chunks(n: usize, batch: usize) -> Vec<Vec<usize>> {
    if n < batch {
        return vec![(0..n).collect()];
    }
    (0..n / batch).map(|c| (c * batch..(c + 1) * batch).collect()).collect()
}

/// `ln B - loss` averaged over contrastive chunks of `ds`. Never exceeds
/// `ln B`, since each loss term is non-negative.
pub fn infonce_estimate(net: &Mlp, ds: &PairedDataset, batch: usize) -> Result<f64> {
    if ds.n() < 2 {
        return Err(Error::EmptyEvaluationSet);
    }
    let chunks = contrastive_chunks(ds.n(), batch);
    let mut total = 0.0;
    for idx in &chunks {
        let (loss, _) = infonce_batch(net, ds, idx, false)?;
        total += (idx.len() as f64).ln() - loss;
    }
    Ok(total / chunks.len() as f64)
}

pub struct InfoNceTask<'a> {
    train: &'a PairedDataset,
    validation: &'a PairedDataset,
    batch: usize,
    order: Vec<usize>,
}

impl<'a> InfoNceTask<'a> {
    pub fn new(train: &'a PairedDataset, validation: &'a PairedDataset, batch: usize) -> Result<Self> {
        if batch < 2 {
            return Err(Error::ConfigInvalid("contrastive batch must be at least 2".into()));
        }
        if train.n() < 2 || validation.n() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: train.n().min(validation.n()) });
        }
        Ok(InfoNceTask { train, validation, batch: batch.min(train.n()), order: (0..train.n()).collect() })
    }
}

impl TrainingTask for InfoNceTask<'_> {
    fn batches_per_epoch(&self) -> usize {
        (self.train.n() / self.batch).max(1)
    }

    fn begin_epoch(&mut self, rng: &mut Rng) {
        self.order = rng.permutation(self.train.n());
    }

    fn batch_gradient(&mut self, net: &Mlp, index: usize, _rng: &mut Rng) -> Result<(f64, Vec<f64>)> {
        let idx = &self.order[index * self.batch..(index + 1) * self.batch];
        let (loss, grads) = infonce_batch(net, self.train, idx, true)?;
        Ok((loss, grads.expect("requested")))
    }

    fn validation_loss(&self, net: &Mlp) -> Result<f64> {
        Ok(-infonce_estimate(net, self.validation, self.batch)?)
    }
}

pub fn train_critic(
    bound: CriticBound,
    train_split: &PairedDataset,
    validation: &PairedDataset,
    cfg: &EstimatorConfig,
    init_rng: &mut Rng,
    rng: &mut Rng,
) -> Result<TrainOutcome> {
    let mut task = CriticTask::new(bound, train_split, validation, cfg.batch_size, rng)?;
    fit_scalar(&mut task, train_split, cfg, init_rng, rng)
}

pub fn train_infonce(
    train_split: &PairedDataset,
    validation: &PairedDataset,
    cfg: &EstimatorConfig,
    init_rng: &mut Rng,
    rng: &mut Rng,
) -> Result<TrainOutcome> {
    let mut task = InfoNceTask::new(train_split, validation, cfg.contrastive_batch())?;
    fit_scalar(&mut task, train_split, cfg, init_rng, rng)
}

fn fit_scalar<T: TrainingTask>(
    task: &mut T,
    train_split: &PairedDataset,
    cfg: &EstimatorConfig,
    init_rng: &mut Rng,
    rng: &mut Rng,
) -> Result<TrainOutcome> {
    let net = Mlp::new(cfg.mlp(train_split.dx() + train_split.dy(), 1), init_rng)?;
    let adam = AdamState::new(net.num_params(), cfg.learning_rate, cfg.weight_decay);
    train(net, task, &cfg.schedule(), adam, rng)
}
