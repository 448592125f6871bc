//! Mutual information estimation by multinomial classification against
//! marginal-preserving Gaussian-copula reference distributions, plus the
//! usual variational baselines, synthetic benchmarks with known ground
//! truth and a sweep harness.

pub mod bench;
pub mod copula;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod ndmath;
pub mod neural;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
