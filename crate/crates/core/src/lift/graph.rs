use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::complex::{CombinatorialComplex, ComplexBuilder};
use crate::error::LiftError;

/// An undirected simple graph with optional node data.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    pub node_features: Option<Array2<f64>>,
    pub node_labels: Option<Vec<usize>>,
}

impl GraphInput {
    /// Normalizes edges to `u < v`, drops self-loops, and deduplicates.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, LiftError> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(LiftError::Argument(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u != v {
                set.insert((u.min(v), u.max(v)));
            }
        }
        Ok(Self {
            num_nodes,
            edges: set.into_iter().collect(),
            node_features: None,
            node_labels: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Sorted `(u, v)` with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }
}

/// Which 3-cliques become rank-2 cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleMode {
    /// Every 3-clique.
    #[default]
    AllTriangles,
    /// Only 3-cliques not contained in a 4-clique.
    MaximalOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphLiftOptions {
    pub with_triangles: bool,
    pub with_global: bool,
    pub triangle_mode: TriangleMode,
}

impl Default for GraphLiftOptions {
    fn default() -> Self {
        Self {
            with_triangles: true,
            with_global: false,
            triangle_mode: TriangleMode::AllTriangles,
        }
    }
}

/// All 3-cliques `[a, b, c]` with `a < b < c`, in lexicographic order.
pub fn triangles(adj: &[Vec<usize>]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for (a, na) in adj.iter().enumerate() {
        for &b in na.iter().filter(|&&b| b > a) {
            let nb = &adj[b];
            // c > b and c adjacent to both; both lists sorted
            let (mut i, mut j) = (0, 0);
            while i < na.len() && j < nb.len() {
                match na[i].cmp(&nb[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        if na[i] > b {
                            out.push([a, b, na[i]]);
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
    out
}

fn in_four_clique(adj: &[Vec<usize>], t: &[usize; 3]) -> bool {
    adj[t[0]]
        .iter()
        .any(|w| adj[t[1]].binary_search(w).is_ok() && adj[t[2]].binary_search(w).is_ok())
}

/// Nodes at rank 0, edges at rank 1, optional 3-cliques at rank 2, and an
/// optional global rank-3 cell spanning the union of all triangles.
pub fn lift_graph(g: &GraphInput, opts: GraphLiftOptions) -> Result<CombinatorialComplex, LiftError> {
    if opts.with_global && !opts.with_triangles {
        return Err(LiftError::Argument(
            "a global rank-3 cell requires triangle cells".into(),
        ));
    }
    let mut b = ComplexBuilder::new(g.num_nodes);
    b.add_cells(1, g.edges.iter().map(|&(u, v)| vec![u, v]));
    if opts.with_triangles {
        let adj = g.neighbors();
        let mut tris = triangles(&adj);
        if opts.triangle_mode == TriangleMode::MaximalOnly {
            tris.retain(|t| !in_four_clique(&adj, t));
        }
        if opts.with_global {
            if tris.is_empty() {
                return Err(LiftError::Construction(
                    "global rank-3 cell requested but the graph has no triangles".into(),
                ));
            }
            let span: BTreeSet<usize> = tris.iter().flatten().copied().collect();
            if tris.len() == 1 {
                return Err(LiftError::Construction(
                    "global rank-3 cell would coincide with the only triangle".into(),
                ));
            }
            b.add_cell(3, span.into_iter().collect());
        }
        b.add_cells(2, tris.into_iter().map(Vec::from));
    }
    Ok(b.build()?)
}
