//! Experiment plumbing for TopoU-Net: datasets, stratified splits, the
//! training loop with test-at-best-validation selection, skip and rank-path
//! ablations, and result files.

pub mod ablation;
pub mod checkpoint;
pub mod dataset;
mod error;
pub mod pool;
pub mod report;
pub mod splits;
pub mod synthetic;
pub mod train;

pub use ablation::{run_ablation, AblationRow, AblationSpec, AblationTable, DeltaRow};
pub use checkpoint::Checkpoint;
pub use dataset::{Dataset, TaskKind};
pub use error::HarnessError;
pub use splits::{make_splits, seed_splits, Split, SplitScheme};
pub use train::{evaluate, train, train_seeds, EpochRecord, Metric, RunResult, TrainOptions, TrainedModel};
