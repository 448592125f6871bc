//! Synthetic benchmark families with ground-truth MI.

mod dataset;
mod gaussian;
mod mog;
mod swiss;
mod task;

pub use dataset::{pearson, DatasetFormat, PairedDataset};
pub use gaussian::{
    condition_number, NonlinearGaussianSpec, Transform, TransformPair, DEFAULT_MATRIX_SEED, MAX_CONDITION,
};
pub use mog::{MogSpec, DEFAULT_MC_SAMPLES};
pub use swiss::SwissRollSpec;
pub use task::{GroundTruth, Task, TaskFamily};
