use std::collections::BTreeSet;

use log::warn;
use ndarray::Array2;
use topounet_tensor::SparseMatrix;

use crate::complex::{Cell, CombinatorialComplex, ComplexBuilder};
use crate::error::LiftError;
use crate::lift::graph::triangles;

#[derive(Clone, Debug, PartialEq)]
pub struct HypergraphInput {
    num_nodes: usize,
    hyperedges: Vec<Vec<usize>>,
    pub node_features: Option<Array2<f64>>,
    pub node_labels: Option<Vec<usize>>,
}

impl HypergraphInput {
    /// Sorts each hyperedge, removes repeated members and repeated
    /// hyperedges; input order of first occurrences is kept.
    pub fn new(num_nodes: usize, hyperedges: impl IntoIterator<Item = Vec<usize>>) -> Result<Self, LiftError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in hyperedges {
            if let Some(&v) = e.iter().find(|&&v| v >= num_nodes) {
                return Err(LiftError::Argument(format!(
                    "hyperedge member {v} out of range for {num_nodes} nodes"
                )));
            }
            let cell = Cell::new(e).ok_or_else(|| LiftError::Argument("empty hyperedge".into()))?;
            if seen.insert(cell.clone()) {
                out.push(cell.vertices().to_vec());
            }
        }
        Ok(Self {
            num_nodes,
            hyperedges: out,
            node_features: None,
            node_labels: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn hyperedges(&self) -> &[Vec<usize>] {
        &self.hyperedges
    }

    /// Native node–hyperedge incidence `H`, columns in the canonical (sorted)
    /// hyperedge order used by the lifted complex. Size-1 hyperedges are
    /// excluded, matching the lift.
    pub fn incidence(&self) -> SparseMatrix {
        let mut edges: Vec<&Vec<usize>> = self.hyperedges.iter().filter(|e| e.len() > 1).collect();
        edges.sort();
        let trips = edges
            .iter()
            .enumerate()
            .flat_map(|(j, e)| e.iter().map(move |&v| (v, j, 1.0)));
        SparseMatrix::from_triplets(self.num_nodes, edges.len(), trips).expect("members checked")
    }
}

/// Nodes at rank 0, hyperedges at rank 1, and (optionally) at rank 2 the
/// union of every triple of hyperedges whose pairwise intersections all have
/// at least `min_pairwise_overlap` members.
///
/// Size-1 hyperedges coincide with rank-0 cells and are dropped. Rank-2
/// unions contained in a single hyperedge would break containment
/// monotonicity and are dropped as well.
pub fn lift_hypergraph(
    h: &HypergraphInput,
    with_rank2: bool,
    min_pairwise_overlap: usize,
) -> Result<CombinatorialComplex, LiftError> {
    if min_pairwise_overlap == 0 {
        return Err(LiftError::Argument("min_pairwise_overlap must be positive".into()));
    }
    let mut edges: Vec<Cell> = Vec::new();
    for e in &h.hyperedges {
        if e.len() == 1 {
            warn!(
                "dropping size-1 hyperedge {{{}}}: it coincides with a rank-0 cell",
                e[0]
            );
        } else {
            edges.push(Cell::new(e.clone()).expect("nonempty"));
        }
    }
    edges.sort();
    let mut b = ComplexBuilder::new(h.num_nodes);
    b.add_cells(1, edges.iter().map(|c| c.vertices().to_vec()));

    if with_rank2 {
        let overlap = |a: &Cell, c: &Cell| {
            let (mut i, mut j, mut n) = (0, 0, 0);
            let (x, y) = (a.vertices(), c.vertices());
            while i < x.len() && j < y.len() {
                match x[i].cmp(&y[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        n += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            n
        };
        // triples with pairwise overlap are triangles of the overlap graph
        let mut adj = vec![Vec::new(); edges.len()];
        for i in 0..edges.len() {
            for j in i + 1..edges.len() {
                if overlap(&edges[i], &edges[j]) >= min_pairwise_overlap {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        let mut unions = BTreeSet::new();
        for [a, c, d] in triangles(&adj) {
            let mut u: Vec<usize> = edges[a].vertices().to_vec();
            u.extend_from_slice(edges[c].vertices());
            u.extend_from_slice(edges[d].vertices());
            unions.insert(Cell::new(u).expect("nonempty"));
        }
        for u in unions {
            if edges.iter().any(|e| u.is_subset_of(e)) {
                warn!("dropping rank-2 cell {u}: contained in a single hyperedge");
                continue;
            }
            b.add_cell(2, u.vertices().to_vec());
        }
    }
    Ok(b.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{incidence, Normalization};

    #[test]
    fn cyclic_pairs_give_one_rank2_cell() {
        let h = HypergraphInput::new(3, [vec![0, 1], vec![1, 2], vec![2, 0]]).unwrap();
        let cc = lift_hypergraph(&h, true, 1).unwrap();
        assert_eq!(cc.num_cells(2), 1);
        assert_eq!(cc.cells(2)[0].vertices(), &[0, 1, 2]);
    }

    #[test]
    fn disjoint_hyperedges_give_no_rank2_cells() {
        let h = HypergraphInput::new(6, [vec![0, 1], vec![2, 3], vec![4, 5]]).unwrap();
        let cc = lift_hypergraph(&h, true, 1).unwrap();
        assert_eq!(cc.num_cells(2), 0);
    }

    #[test]
    fn node_hyperedge_incidence_is_native() {
        let h = HypergraphInput::new(5, [vec![3, 1, 0], vec![0, 4], vec![1, 2, 3, 4]]).unwrap();
        let cc = lift_hypergraph(&h, false, 1).unwrap();
        let b = incidence(&cc, 0, 1, Normalization::Raw).unwrap();
        assert_eq!(b.raw(), &h.incidence());
    }

    #[test]
    fn singleton_hyperedges_are_dropped() {
        let h = HypergraphInput::new(3, [vec![1], vec![0, 1, 2]]).unwrap();
        let cc = lift_hypergraph(&h, false, 1).unwrap();
        assert_eq!(cc.num_cells(1), 1);
        assert!(cc.validate().is_empty());
    }

    #[test]
    fn unions_inside_a_hyperedge_are_dropped() {
        let h = HypergraphInput::new(4, [vec![0, 1, 2, 3], vec![0, 1], vec![1, 2]]).unwrap();
        let cc = lift_hypergraph(&h, true, 1).unwrap();
        assert_eq!(cc.num_cells(2), 0);
        assert!(cc.validate().is_empty());
    }

    #[test]
    fn overlap_threshold_is_respected() {
        let h = HypergraphInput::new(6, [vec![0, 1, 2], vec![1, 2, 3], vec![2, 3, 4, 1], vec![0, 5]]).unwrap();
        let loose = lift_hypergraph(&h, true, 1).unwrap();
        let strict = lift_hypergraph(&h, true, 2).unwrap();
        assert_eq!(strict.num_cells(2), 1);
        assert!(loose.num_cells(2) >= strict.num_cells(2));
        assert!(matches!(lift_hypergraph(&h, true, 0), Err(LiftError::Argument(_))));
    }
}
