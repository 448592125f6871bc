//! Dense MLP with hand-written backpropagation, softmax cross-entropy,
//! Adam and an early-stopping training loop.

mod adam;
mod loss;
mod mlp;
mod train;

pub use adam::AdamState;
pub use loss::{softmax_rows, softmax_xent, softmax_xent_backward};
pub use mlp::{ForwardCache, Mlp, MlpConfig};
pub use train::{train, EpochRecord, LabeledBatches, TrainOutcome, TrainSchedule, TrainingTask};
