//! Constructors that turn raw domains into combinatorial complexes.

mod graph;
mod grid;
mod hypergraph;
mod point_cloud;

pub use graph::{lift_graph, triangles, GraphInput, GraphLiftOptions, TriangleMode};
pub use grid::{lift_grid, GridInput};
pub use hypergraph::{lift_hypergraph, HypergraphInput};
pub use point_cloud::{knn, lift_point_cloud, PointCloudInput};
