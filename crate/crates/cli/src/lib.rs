//! Library side of the `topounet` command: experiment configs, data
//! loading, the verification suite, and the command bodies.

pub mod commands;
mod error;
pub mod experiment;
pub mod verify;

pub use commands::{BuildSource, Format, Report};
pub use error::CliError;
pub use experiment::{load_dataset, DataSpec, ExperimentConfig};
