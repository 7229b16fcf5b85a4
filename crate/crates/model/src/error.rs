use thiserror::Error;
use topounet_core::ComplexError;
use topounet_tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{stage} at level {level} (rank {rank}) has shape {got:?}, expected {expected:?}")]
    Shape {
        stage: &'static str,
        level: usize,
        rank: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
