//! Sweep harness: grids of tasks × estimators × seeds, CSV/JSON records
//! and per-cell summaries.
//!
//! Every record carries enough to be rerun alone: the task parameters, the
//! sample size and the run seed. The run seed both generates the dataset
//! (on a dedicated sub-stream) and seeds the estimator.

mod config;
mod record;
mod summary;
mod sweep;

pub use config::SweepConfig;
pub use record::{read_records, write_records, CsvAppender, EstimateRecord, RecordFormat, STATUS_OK};
pub use summary::{read_summaries, summarize, write_summaries, write_summaries_to, Summary};
pub use sweep::{cells, run_record, run_sweep, Cell, SweepRun, DATA_STREAM};
