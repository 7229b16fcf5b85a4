//! Bundled synthetic data, so verification and ablations need no downloads.

use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use topounet_core::lift::{lift_graph, lift_grid, GraphInput, GraphLiftOptions, GridInput, HypergraphInput};
use topounet_core::CombinatorialComplex;

use crate::dataset::{Dataset, TaskKind};
use crate::error::HarnessError;

/// Parameters of [`offset_rings`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OffsetRingOptions {
    pub components: usize,
    pub nodes_per_component: usize,
    /// Number of offset-relative levels; there are twice as many classes.
    pub levels: usize,
    pub feature_dim: usize,
    /// Standard deviation of the per-node scalar noise, in level units.
    pub noise: f64,
    pub seed: u64,
}

impl Default for OffsetRingOptions {
    fn default() -> Self {
        Self {
            components: 8,
            nodes_per_component: 111,
            levels: 3,
            feature_dim: 8,
            noise: 0.15,
            seed: 0,
        }
    }
}

impl OffsetRingOptions {
    pub fn num_classes(&self) -> usize {
        2 * self.levels
    }
}

/// Cycle on `n` nodes cut into blocks of three; a chord closes the block
/// into a triangle where `closed[b]` is set.
fn ring_edges(n: usize, closed: &[bool]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    for (b, &c) in closed.iter().enumerate() {
        if c {
            edges.push((3 * b, 3 * b + 2));
        }
    }
    edges
}

/// Heterophilic node classification with a local and a global factor.
///
/// Each component is a cycle whose consecutive node triples are closed into
/// triangles at random. Node `v` in component `k` has level `q_v` and
/// triangle bit `t_v`, and label `2 q_v + t_v`. Its features embed the
/// scalar `m_k + q_v + noise`, where the component offsets `m_k` are a
/// permutation of `0..components`, so `q_v` needs the component mean. `t_v`
/// is not in the features at all: mean aggregation over edges cannot see
/// it, triangle cells can. The global cell of each component resolves `m_k`.
pub fn offset_rings(opts: &OffsetRingOptions) -> Result<Dataset, HarnessError> {
    let n = opts.nodes_per_component;
    if n < 6 || !n.is_multiple_of(3) || opts.levels < 2 || opts.components == 0 || opts.feature_dim == 0 {
        return Err(HarnessError::Data(
            "offset rings need a multiple of 3 nodes (>= 6), >= 2 levels".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut offsets: Vec<usize> = (0..opts.components).collect();
    offsets.shuffle(&mut rng);
    let dirs: Vec<f64> = (0..opts.feature_dim).map(|_| rng.random_range(0.5..1.0)).collect();
    let center = (opts.components + opts.levels) as f64 / 2.0 - 1.0;
    let scale = center.max(1.0);
    let lift = GraphLiftOptions {
        with_triangles: true,
        with_global: true,
        ..GraphLiftOptions::default()
    };
    let mut parts = Vec::new();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for &m in &offsets {
        let mut closed: Vec<bool> = (0..n / 3).map(|b| b % 2 == 0).collect();
        closed.shuffle(&mut rng);
        parts.push(lift_graph(&GraphInput::new(n, ring_edges(n, &closed))?, lift)?);
        for v in 0..n {
            let q = rng.random_range(0..opts.levels);
            let eps: f64 = StandardNormal.sample(&mut rng);
            let s = ((m + q) as f64 + opts.noise * eps - center) / scale;
            for d in &dirs {
                let jitter: f64 = StandardNormal.sample(&mut rng);
                rows.push(s * d + 0.01 * jitter);
            }
            labels.push(2 * q + usize::from(closed[v / 3]));
        }
    }
    let features = Array2::from_shape_vec((labels.len(), opts.feature_dim), rows).expect("row per node");
    let complex = CombinatorialComplex::disjoint_union(&parts);
    Dataset::nodes(TaskKind::NodeTask, complex, features, labels, opts.num_classes())
}

/// Planted-partition graph with features `class mean + noise`. With
/// `p_in > p_out` it is homophilic, with `p_in < p_out` heterophilic.
pub fn planted_partition(
    nodes: usize,
    classes: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    signal: f64,
    seed: u64,
) -> Result<GraphInput, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..nodes).map(|i| i % classes).collect();
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in u + 1..nodes {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let means = Array2::from_shape_fn((classes, feature_dim), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        signal * z
    });
    let features = Array2::from_shape_fn((nodes, feature_dim), |(i, j)| {
        let eps: f64 = StandardNormal.sample(&mut rng);
        means[[labels[i], j]] + eps
    });
    let mut g = GraphInput::new(nodes, edges)?;
    g.node_features = Some(features);
    g.node_labels = Some(labels);
    Ok(g)
}

/// Fraction of edges joining equal labels.
pub fn edge_homophily(g: &GraphInput, labels: &[usize]) -> f64 {
    let e = g.edges();
    if e.is_empty() {
        return 0.0;
    }
    e.iter().filter(|&&(u, v)| labels[u] == labels[v]).count() as f64 / e.len() as f64
}

/// `count` 4×4 single-channel images plus small noise: a single lit row
/// or column (label 0), or a lit row crossed with a lit column (label 1).
pub fn toy_grids(count: usize, seed: u64) -> Vec<(GridInput, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let label = i % 2;
            let vertical = rng.random_bool(0.5);
            let (a, b) = (rng.random_range(0..4), rng.random_range(0..4));
            let pixels = Array2::from_shape_fn((16, 1), |(p, _)| {
                let (r, c) = (p / 4, p % 4);
                let on = match (label, vertical) {
                    (0, false) => r == a,
                    (0, true) => c == a,
                    _ => r == a || c == b,
                };
                f64::from(u8::from(on)) + 0.05 * rng.random_range(-1.0..1.0)
            });
            (GridInput::new(4, 4, pixels).expect("4x4"), label)
        })
        .collect()
}

/// Graph-classification dataset over lifted [`toy_grids`].
pub fn toy_grid_dataset(count: usize, seed: u64) -> Result<Dataset, HarnessError> {
    let grids = toy_grids(count, seed);
    let complex = Arc::new(lift_grid(&grids[0].0)?);
    let features = grids.iter().map(|(g, _)| g.pixels.clone()).collect();
    let labels = grids.iter().map(|(_, l)| *l).collect();
    Dataset::graphs(vec![complex; count], features, labels, 2)
}

/// Three overlapping hyperedges on seven nodes, with two-class labels.
pub fn toy_hypergraph() -> HypergraphInput {
    let mut h = HypergraphInput::new(7, [vec![0, 1, 2, 3], vec![2, 3, 4, 5], vec![4, 5, 6, 0]]).expect("valid");
    h.node_labels = Some(vec![0, 0, 1, 1, 0, 0, 1]);
    h.node_features = Some(Array2::from_shape_fn((7, 2), |(i, j)| ((i * 3 + j) % 5) as f64 / 4.0));
    h
}
