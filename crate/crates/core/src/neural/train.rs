use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndmath::{Matrix, Rng};

use super::{softmax_xent, softmax_xent_backward, AdamState, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule { batch_size: 512, max_epochs: 100, patience: 10, validation_fraction: 0.1 }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::ConfigInvalid("batch size and epoch budget must be positive".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return Err(Error::ConfigInvalid(format!(
                "validation fraction {} outside (0, 0.5]",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// A minibatch objective the generic [`train`] loop can drive.
pub trait TrainingTask {
    fn batches_per_epoch(&self) -> usize;

    /// Reshuffles whatever per-epoch state the task keeps.
    fn begin_epoch(&mut self, rng: &mut Rng);

    /// Loss on minibatch `index` of the current epoch and its gradient.
    fn batch_gradient(&mut self, net: &Mlp, index: usize, rng: &mut Rng) -> Result<(f64, Vec<f64>)>;

    /// Loss on held-out data; lower is better.
    fn validation_loss(&self, net: &Mlp) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub best_validation_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation loss seen.
    pub net: Mlp,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Adam training with early stopping on validation loss.
///
/// Epoch 0 records the untrained network, so the returned snapshot is never
/// worse on validation than the initialization.
pub fn train<T: TrainingTask + ?Sized>(
    mut net: Mlp,
    task: &mut T,
    schedule: &TrainSchedule,
    mut adam: AdamState,
    rng: &mut Rng,
) -> Result<TrainOutcome> {
    schedule.validate()?;
    let initial = task.validation_loss(&net)?;
    let mut best_val = if initial.is_finite() { initial } else { f64::INFINITY };
    let mut best = net.clone();
    let mut best_epoch = 0;
    let mut history =
        vec![EpochRecord { epoch: 0, train_loss: f64::NAN, validation_loss: initial, best_validation_loss: best_val }];
    let mut stale = 0;

    for epoch in 1..=schedule.max_epochs {
        task.begin_epoch(rng);
        let batches = task.batches_per_epoch();
        let mut total = 0.0;
        let mut counted = 0usize;
        for b in 0..batches {
            let (loss, grads) = task.batch_gradient(&net, b, rng)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                log::debug!("skipping non-finite minibatch {b} in epoch {epoch}");
                continue;
            }
            adam.step(net.params_mut(), &grads);
            total += loss;
            counted += 1;
        }
        let val = task.validation_loss(&net)?;
        if val.is_finite() && val < best_val {
            best_val = val;
            best = net.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(EpochRecord {
            epoch,
            train_loss: if counted > 0 { total / counted as f64 } else { f64::NAN },
            validation_loss: val,
            best_validation_loss: best_val,
        });
        if stale >= schedule.patience || net.params().iter().any(|p| !p.is_finite()) {
            break;
        }
    }
    log::debug!("stopped after {} epochs, best epoch {best_epoch}", history.len() - 1);
    Ok(TrainOutcome { net: best, best_epoch, history })
}

/// Class-balanced minibatches over a labelled dataset.
///
/// Every batch carries `batch_size / classes` rows of each class, cycling
/// through a fresh per-class permutation each epoch. A stratified
/// validation split is held out at construction.
pub struct LabeledBatches {
    inputs: Matrix,
    labels: Vec<usize>,
    classes: usize,
    per_class: usize,
    train_by_class: Vec<Vec<usize>>,
    order: Vec<Vec<usize>>,
    val_inputs: Matrix,
    val_labels: Vec<usize>,
}

impl LabeledBatches {
    pub fn new(
        inputs: Matrix,
        labels: Vec<usize>,
        classes: usize,
        schedule: &TrainSchedule,
        rng: &mut Rng,
    ) -> Result<Self> {
        schedule.validate()?;
        if labels.len() != inputs.rows() {
            return Err(Error::shape(format!("{} labels", inputs.rows()), labels.len()));
        }
        if classes == 0 || schedule.batch_size < classes {
            return Err(Error::ConfigInvalid(format!(
                "batch size {} cannot hold {classes} balanced classes",
                schedule.batch_size
            )));
        }
        let mut by_class = vec![Vec::new(); classes];
        for &i in rng.permutation(labels.len()).iter() {
            let c = labels[i];
            if c >= classes {
                return Err(Error::shape(format!("labels below {classes}"), c));
            }
            by_class[c].push(i);
        }
        let mut val_idx = Vec::new();
        for members in by_class.iter_mut() {
            let n_val = (members.len() as f64 * schedule.validation_fraction).floor() as usize;
            val_idx.extend(members.drain(..n_val));
        }
        if let Some(c) = by_class.iter().position(Vec::is_empty) {
            return Err(Error::DegenerateData(format!("class {c} has no training samples")));
        }
        let val_inputs = inputs.select_rows(&val_idx);
        let val_labels = val_idx.iter().map(|&i| labels[i]).collect();
        Ok(LabeledBatches {
            order: by_class.clone(),
            inputs,
            labels,
            classes,
            per_class: schedule.batch_size / classes,
            train_by_class: by_class,
            val_inputs,
            val_labels,
        })
    }

    pub fn validation_set(&self) -> (&Matrix, &[usize]) {
        (&self.val_inputs, &self.val_labels)
    }
}

impl TrainingTask for LabeledBatches {
    fn batches_per_epoch(&self) -> usize {
        let smallest = self.train_by_class.iter().map(Vec::len).min().unwrap_or(0);
        (smallest / self.per_class).max(1)
    }

    fn begin_epoch(&mut self, rng: &mut Rng) {
        for (order, members) in self.order.iter_mut().zip(&self.train_by_class) {
            *order = rng.permutation(members.len()).into_iter().map(|i| members[i]).collect();
        }
    }

    fn batch_gradient(&mut self, net: &Mlp, index: usize, _rng: &mut Rng) -> Result<(f64, Vec<f64>)> {
        let mut rows = Vec::with_capacity(self.per_class * self.classes);
        for order in &self.order {
            for j in 0..self.per_class {
                rows.push(order[(index * self.per_class + j) % order.len()]);
            }
        }
        let batch = self.inputs.select_rows(&rows);
        let labels: Vec<usize> = rows.iter().map(|&i| self.labels[i]).collect();
        softmax_xent_backward(net, &batch, &labels)
    }

    fn validation_loss(&self, net: &Mlp) -> Result<f64> {
        if self.val_labels.is_empty() {
            return Err(Error::EmptyEvaluationSet);
        }
        softmax_xent(&net.forward(&self.val_inputs)?, &self.val_labels)
    }
}
