//! Combinatorial complexes for topological deep learning: ranked cells,
//! incidence-based operators between ranks, support-ratio analysis, and
//! lifting of graphs, hypergraphs, image grids, and point clouds.

pub mod complex;
mod error;
pub mod io;
pub mod lift;
pub mod operators;
pub mod profile;

pub use complex::{Cell, CombinatorialComplex, ComplexBuilder, ComplexJson, Permutation, Reindexing, Violation};
pub use error::{ComplexError, LiftError, ParseError};
pub use operators::{adjacency, incidence, AdjacencyOperator, IncidenceOperator, Normalization};
pub use profile::{min_bottleneck_width, support_profile, RankPath, Ratio, SupportProfile};
