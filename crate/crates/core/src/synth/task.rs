use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ndmath::Rng;

use super::{MogSpec, NonlinearGaussianSpec, PairedDataset, SwissRollSpec, Transform, TransformPair};

/// Benchmark families, named as on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskFamily {
    #[serde(rename = "gauss")]
    Gauss,
    #[serde(rename = "mog1")]
    Mog1,
    #[serde(rename = "mog2")]
    Mog2,
    #[serde(rename = "swiss-roll")]
    SwissRoll,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 4] = [TaskFamily::Gauss, TaskFamily::Mog1, TaskFamily::Mog2, TaskFamily::SwissRoll];

    pub fn name(self) -> &'static str {
        match self {
            TaskFamily::Gauss => "gauss",
            TaskFamily::Mog1 => "mog1",
            TaskFamily::Mog2 => "mog2",
            TaskFamily::SwissRoll => "swiss-roll",
        }
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskFamily::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown task {s:?} (gauss, mog1, mog2, swiss-roll)")))
    }
}

/// A fully specified synthetic task.
#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Gauss(NonlinearGaussianSpec),
    Mog { family: TaskFamily, spec: MogSpec },
    SwissRoll(SwissRollSpec),
}

/// Ground-truth MI in nats; `std_error` is 0 for closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruth {
    pub value: f64,
    pub std_error: f64,
}

impl Task {
    /// `rho` is ignored by the mixture presets, `d` and `transforms` by
    /// the Swiss roll.
    pub fn new(family: TaskFamily, d: usize, rho: f64, transforms: TransformPair) -> Result<Self> {
        Ok(match family {
            TaskFamily::Gauss => Task::Gauss(NonlinearGaussianSpec::new(d, rho, transforms)?),
            TaskFamily::Mog1 => Task::Mog { family, spec: MogSpec::mog1(d)? },
            TaskFamily::Mog2 => Task::Mog { family, spec: MogSpec::mog2(d)? },
            TaskFamily::SwissRoll => Task::SwissRoll(SwissRollSpec::new(rho)?),
        })
    }

    pub fn family(&self) -> TaskFamily {
        match self {
            Task::Gauss(_) => TaskFamily::Gauss,
            Task::Mog { family, .. } => *family,
            Task::SwissRoll(_) => TaskFamily::SwissRoll,
        }
    }

    /// Dimension per side as reported in records.
    pub fn d(&self) -> usize {
        match self {
            Task::Gauss(s) => s.d,
            Task::Mog { spec, .. } => spec.d,
            Task::SwissRoll(_) => 1,
        }
    }

    /// Dependence parameter as reported in records; 0 for mixtures.
    pub fn rho(&self) -> f64 {
        match self {
            Task::Gauss(s) => s.rho,
            Task::Mog { .. } => 0.0,
            Task::SwissRoll(s) => s.rho,
        }
    }

    pub fn transforms(&self) -> TransformPair {
        match self {
            Task::Gauss(s) => s.transforms,
            _ => TransformPair::both(Transform::Identity),
        }
    }

    pub fn generate(&self, n: usize, rng: &mut Rng) -> PairedDataset {
        match self {
            Task::Gauss(s) => s.generate(n, rng),
            Task::Mog { spec, .. } => spec.generate(n, rng),
            Task::SwissRoll(s) => s.generate(n, rng),
        }
    }

    /// Closed form where available; otherwise a Monte Carlo estimate over
    /// `mc_samples` draws from `oracle_rng`.
    pub fn ground_truth(&self, mc_samples: usize, oracle_rng: &Rng, exec: Execution) -> Result<GroundTruth> {
        match self {
            Task::Gauss(s) => Ok(GroundTruth { value: s.true_mi(), std_error: 0.0 }),
            Task::SwissRoll(s) => Ok(GroundTruth { value: s.true_mi(), std_error: 0.0 }),
            Task::Mog { spec, .. } => {
                let (value, std_error) = spec.true_mi(mc_samples, oracle_rng, exec)?;
                Ok(GroundTruth { value, std_error })
            }
        }
    }
}
