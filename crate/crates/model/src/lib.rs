//! TopoU-Net over a combinatorial complex: an encoder that transports
//! cochains up a rank path, a bottleneck at the top rank, and a decoder that
//! transports back down with matched-rank skip merges.

pub mod bound;
pub mod capacity;
pub mod config;
mod error;
pub mod model;

pub use bound::{BoundComplex, Direction};
pub use capacity::{linear_capacity_probe, CapacityReport};
pub use config::{Head, Merge, RefinementKind, RefinementSpec, TopoUNetConfig, TransportKind, TransportSpec};
pub use error::ModelError;
pub use model::{count_parameters, init_parameters, ForwardVars, ModelState, Pass, Target, TopoUNet};
