use ndarray::Array2;

use crate::complex::CombinatorialComplex;
use crate::error::LiftError;
use crate::lift::graph::{lift_graph, GraphInput, GraphLiftOptions, TriangleMode};

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudInput {
    pub points: Array2<f64>,
    pub k: usize,
}

impl PointCloudInput {
    pub fn new(points: Array2<f64>, k: usize) -> Result<Self, LiftError> {
        if points.ncols() != 3 {
            return Err(LiftError::Argument(format!(
                "points must have 3 coordinates, got {}",
                points.ncols()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(LiftError::Argument("point coordinates must be finite".into()));
        }
        if k == 0 || k >= points.nrows() {
            return Err(LiftError::Argument(format!(
                "k = {k} needs 1 <= k < {} points",
                points.nrows()
            )));
        }
        Ok(Self { points, k })
    }
}

/// Indices of the `k` nearest points to each point. Ties go to the lower index.
pub fn knn(points: &Array2<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = points.nrows();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = &points.row(i) - &points.row(j);
                    (diff.dot(&diff), j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Points at rank 0, symmetrized kNN edges at rank 1, and every 3-clique of
/// the kNN graph at rank 2.
pub fn lift_point_cloud(p: &PointCloudInput) -> Result<CombinatorialComplex, LiftError> {
    let n = p.points.nrows();
    let edges = knn(&p.points, p.k)
        .into_iter()
        .enumerate()
        .flat_map(|(i, nbrs)| nbrs.into_iter().map(move |j| (i, j)));
    let g = GraphInput::new(n, edges)?;
    lift_graph(
        &g,
        GraphLiftOptions {
            with_triangles: true,
            with_global: false,
            triangle_mode: TriangleMode::AllTriangles,
        },
    )
}
