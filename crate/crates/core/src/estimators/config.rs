use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{MlpConfig, TrainSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "mime")]
    Mime,
    #[serde(rename = "mre")]
    Mre,
    #[serde(rename = "mine")]
    Mine,
    #[serde(rename = "nwj")]
    Nwj,
    #[serde(rename = "infonce")]
    InfoNce,
    #[serde(rename = "doe-gaussian")]
    DoeGaussian,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Mime,
        EstimatorKind::Mre,
        EstimatorKind::Mine,
        EstimatorKind::Nwj,
        EstimatorKind::InfoNce,
        EstimatorKind::DoeGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Mime => "mime",
            EstimatorKind::Mre => "mre",
            EstimatorKind::Mine => "mine",
            EstimatorKind::Nwj => "nwj",
            EstimatorKind::InfoNce => "infonce",
            EstimatorKind::DoeGaussian => "doe-gaussian",
        }
    }

    /// Four-class classifiers that support both readout modes.
    pub fn is_multinomial(self) -> bool {
        matches!(self, EstimatorKind::Mime | EstimatorKind::Mre)
    }

    /// The bound a run of this estimator reports under `requested`.
    pub fn mode_for(self, requested: Mode) -> Mode {
        match self {
            EstimatorKind::Mime | EstimatorKind::Mre => requested,
            EstimatorKind::Mine => Mode::Dv,
            EstimatorKind::Nwj => Mode::Nwj,
            EstimatorKind::InfoNce => Mode::InfoNce,
            EstimatorKind::DoeGaussian => Mode::ClosedForm,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = EstimatorKind::ALL.iter().map(|k| k.name()).collect();
            Error::ConfigInvalid(format!("unknown estimator {s:?} (valid: {})", names.join(", ")))
        })
    }
}

/// How an estimate is read out of a trained model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Mean log-ratio `h₁ - h₄` over evaluation pairs.
    #[default]
    Ratio,
    /// Donsker–Varadhan bound.
    Dv,
    Nwj,
    #[serde(rename = "infonce")]
    InfoNce,
    ClosedForm,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Ratio, Mode::Dv, Mode::Nwj, Mode::InfoNce, Mode::ClosedForm];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ratio => "ratio",
            Mode::Dv => "dv",
            Mode::Nwj => "nwj",
            Mode::InfoNce => "infonce",
            Mode::ClosedForm => "closed-form",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown mode {s:?} (ratio, dv)")))
    }
}

/// Architecture, optimizer and training hyperparameters shared by every
/// neural estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub skip: bool,
    pub leaky_slope: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub evaluation_fraction: f64,
    /// Contrastive batch for InfoNCE; each step scores `B²` pairs.
    /// 0 means `batch_size`.
    pub infonce_batch: usize,
    /// Readout of the four-class estimators.
    pub mode: Mode,
    /// Standardize every input column with statistics of the training split.
    pub standardize: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            hidden_layers: 3,
            width: 500,
            skip: true,
            leaky_slope: 0.01,
            learning_rate: 5e-4,
            weight_decay: 1e-6,
            batch_size: 512,
            max_epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
            evaluation_fraction: 0.1,
            infonce_batch: 0,
            mode: Mode::Ratio,
            standardize: true,
        }
    }
}

impl EstimatorConfig {
    /// Settings sized for a single CPU core: narrow layers, a larger step
    /// size to make up for them, and a small contrastive batch.
    pub fn desk() -> Self {
        EstimatorConfig {
            width: 32,
            learning_rate: 2e-3,
            max_epochs: 200,
            patience: 10,
            infonce_batch: 32,
            ..EstimatorConfig::default()
        }
    }

    pub fn contrastive_batch(&self) -> usize {
        if self.infonce_batch == 0 {
            self.batch_size
        } else {
            self.infonce_batch
        }
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
        }
    }

    pub fn mlp(&self, input_dim: usize, outputs: usize) -> MlpConfig {
        MlpConfig {
            input_dim,
            hidden_layers: self.hidden_layers,
            width: self.width,
            outputs,
            skip: self.skip,
            leaky_slope: self.leaky_slope,
        }
    }

    pub fn validate_for(&self, kind: EstimatorKind) -> Result<()> {
        self.schedule().validate()?;
        if self.hidden_layers > 0 && self.width == 0 {
            return Err(Error::ConfigInvalid("width must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite())
            || self.weight_decay.is_nan()
            || self.weight_decay < 0.0
        {
            return Err(Error::ConfigInvalid("learning rate must be positive, weight decay non-negative".into()));
        }
        if !(self.evaluation_fraction > 0.0 && self.validation_fraction + self.evaluation_fraction < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "evaluation fraction {} leaves no training data",
                self.evaluation_fraction
            )));
        }
        if matches!(self.mode, Mode::Nwj | Mode::InfoNce | Mode::ClosedForm) {
            return Err(Error::ConfigInvalid(format!("mode {} cannot be requested (ratio, dv)", self.mode)));
        }
        match kind {
            EstimatorKind::Mime | EstimatorKind::Mre if !self.batch_size.is_multiple_of(4) => {
                Err(Error::ConfigInvalid(format!(
                    "batch size {} does not split into four equal class shares",
                    self.batch_size
                )))
            }
            EstimatorKind::Mine | EstimatorKind::Nwj if !self.batch_size.is_multiple_of(2) => {
                Err(Error::ConfigInvalid(format!(
                    "batch size {} does not split into equal joint and product halves",
                    self.batch_size
                )))
            }
            EstimatorKind::InfoNce if self.contrastive_batch() < 2 => {
                Err(Error::ConfigInvalid("contrastive batch must be at least 2".into()))
            }
            _ => Ok(()),
        }
    }
}

/// One MI estimate in nats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub value: f64,
    pub estimator: EstimatorKind,
    pub mode: Mode,
    pub eval_samples: usize,
    pub seed: u64,
}
