//! Dense/sparse matrix numerics with a small reverse-mode autodiff tape,
//! named parameters, Adam, and checkpoint IO.

pub mod checkpoint;
mod error;
pub mod params;
pub mod sparse;
pub mod tape;

pub use error::TensorError;
pub use params::{glorot_uniform, Adam, Binding, Parameter, ParameterStore};
pub use sparse::{SparseJson, SparseMatrix};
pub use tape::{Activation, Tape, Var};
