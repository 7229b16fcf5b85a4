use thiserror::Error;
use topounet_core::{ComplexError, LiftError};
use topounet_model::ModelError;
use topounet_tensor::TensorError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("split: {0}")]
    Split(String),
    #[error("{} exists; pass --force to overwrite", .0.display())]
    Exists(std::path::PathBuf),
    #[error("dataset: {0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
