//! The combinatorial complex: vertex subsets organized by rank.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::ComplexError;

/// A nonempty set of vertex indices, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cell(Vec<usize>);

impl Cell {
    /// Sorts and deduplicates `vertices`. Returns `None` for an empty set.
    pub fn new(mut vertices: Vec<usize>) -> Option<Self> {
        vertices.sort_unstable();
        vertices.dedup();
        (!vertices.is_empty()).then_some(Self(vertices))
    }

    pub fn singleton(v: usize) -> Self {
        Self(vec![v])
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self ⊆ other`, by a merge walk over both sorted lists.
    pub fn is_subset_of(&self, other: &Cell) -> bool {
        let mut it = other.0.iter();
        self.0.iter().all(|v| it.by_ref().any(|w| w == v))
    }

    pub fn is_strict_subset_of(&self, other: &Cell) -> bool {
        self.len() < other.len() && self.is_subset_of(other)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Vertex count plus ordered cell lists per rank. Only active (nonempty)
/// ranks are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorialComplex {
    vertex_count: usize,
    ranks: BTreeMap<usize, Vec<Cell>>,
}

/// On-disk form: `{"vertex_count": n, "cells": {"<rank>": [[v, ...], ...]}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexJson {
    pub vertex_count: usize,
    pub cells: BTreeMap<usize, Vec<Vec<usize>>>,
}

/// One broken invariant found by [`CombinatorialComplex::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingSingleton {
        vertex: usize,
    },
    NonSingletonAtRankZero {
        cell: Cell,
    },
    DuplicateWithinRank {
        rank: usize,
        cell: Cell,
    },
    SameCellAtTwoRanks {
        cell: Cell,
        ranks: (usize, usize),
    },
    ContainmentMonotonicity {
        subset: Cell,
        subset_rank: usize,
        superset: Cell,
        superset_rank: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingSingleton { vertex } => {
                write!(f, "missing singleton: vertex {vertex} has no rank-0 cell")
            }
            Violation::NonSingletonAtRankZero { cell } => {
                write!(f, "rank-0 cell {cell} is not a singleton")
            }
            Violation::DuplicateWithinRank { rank, cell } => {
                write!(f, "duplicate cell {cell} at rank {rank}")
            }
            Violation::SameCellAtTwoRanks { cell, ranks } => {
                write!(f, "cell {cell} stored at ranks {} and {}", ranks.0, ranks.1)
            }
            Violation::ContainmentMonotonicity {
                subset,
                subset_rank,
                superset,
                superset_rank,
            } => write!(
                f,
                "containment monotonicity: {subset} (rank {subset_rank}) ⊆ {superset} (rank {superset_rank})"
            ),
        }
    }
}

/// For each vertex, the sorted indices of the cells (of one rank) containing it.
pub(crate) struct ContainmentIndex<'a> {
    cells: &'a [Cell],
    by_vertex: HashMap<usize, Vec<usize>>,
}

impl<'a> ContainmentIndex<'a> {
    pub(crate) fn new(cells: &'a [Cell]) -> Self {
        let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
        for (j, c) in cells.iter().enumerate() {
            for &v in c.vertices() {
                by_vertex.entry(v).or_default().push(j);
            }
        }
        Self { cells, by_vertex }
    }

    /// Indices (ascending) of indexed cells that contain every vertex of `cell`.
    pub(crate) fn supersets(&self, cell: &Cell) -> Vec<usize> {
        let mut lists: Vec<&Vec<usize>> = Vec::with_capacity(cell.len());
        for v in cell.vertices() {
            match self.by_vertex.get(v) {
                Some(l) => lists.push(l),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let mut acc: Vec<usize> = lists[0].clone();
        for l in &lists[1..] {
            acc.retain(|j| l.binary_search(j).is_ok());
            if acc.is_empty() {
                break;
            }
        }
        acc
    }

    pub(crate) fn strict_supersets(&self, cell: &Cell) -> Vec<usize> {
        let mut s = self.supersets(cell);
        s.retain(|&j| self.cells[j].len() > cell.len());
        s
    }
}

impl CombinatorialComplex {
    /// Builds a complex in canonical form: each rank sorted lexicographically
    /// and deduplicated. No containment checks are performed; see
    /// [`CombinatorialComplex::validate`].
    pub fn from_cells(
        vertex_count: usize,
        cells: impl IntoIterator<Item = (usize, Vec<Vec<usize>>)>,
    ) -> Result<Self, ComplexError> {
        let mut ranks: BTreeMap<usize, Vec<Cell>> = BTreeMap::new();
        for (rank, list) in cells {
            let entry = ranks.entry(rank).or_default();
            for verts in list {
                entry.push(Self::checked_cell(vertex_count, rank, verts)?);
            }
        }
        for list in ranks.values_mut() {
            list.sort();
            list.dedup();
        }
        ranks.retain(|_, l| !l.is_empty());
        Ok(Self { vertex_count, ranks })
    }

    /// Builds a complex keeping the given per-rank order. Duplicates within a
    /// rank are an error.
    pub fn from_ordered_cells(
        vertex_count: usize,
        cells: impl IntoIterator<Item = (usize, Vec<Vec<usize>>)>,
    ) -> Result<Self, ComplexError> {
        let mut ranks: BTreeMap<usize, Vec<Cell>> = BTreeMap::new();
        for (rank, list) in cells {
            let entry = ranks.entry(rank).or_default();
            let mut seen = std::collections::HashSet::new();
            for verts in list {
                let cell = Self::checked_cell(vertex_count, rank, verts)?;
                if !seen.insert(cell.clone()) {
                    return Err(ComplexError::DuplicateCell { rank, cell: cell.0 });
                }
                entry.push(cell);
            }
        }
        ranks.retain(|_, l| !l.is_empty());
        Ok(Self { vertex_count, ranks })
    }

    fn checked_cell(vertex_count: usize, rank: usize, verts: Vec<usize>) -> Result<Cell, ComplexError> {
        if let Some(&v) = verts.iter().find(|&&v| v >= vertex_count) {
            return Err(ComplexError::VertexOutOfRange {
                vertex: v,
                vertex_count,
            });
        }
        Cell::new(verts).ok_or(ComplexError::EmptyCell { rank })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Cells of `rank` in stored order (empty for inactive ranks).
    pub fn cells(&self, rank: usize) -> &[Cell] {
        self.ranks.get(&rank).map_or(&[], Vec::as_slice)
    }

    /// `n_r`.
    pub fn num_cells(&self, rank: usize) -> usize {
        self.cells(rank).len()
    }

    pub fn is_active(&self, rank: usize) -> bool {
        self.ranks.contains_key(&rank)
    }

    pub fn active_ranks(&self) -> Vec<usize> {
        self.ranks.keys().copied().collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.ranks.keys().next_back().copied()
    }

    pub fn require_active(&self, rank: usize) -> Result<(), ComplexError> {
        if self.is_active(rank) {
            Ok(())
        } else {
            Err(ComplexError::InactiveRank(rank))
        }
    }

    /// Position of `cell` within its rank, if stored there.
    pub fn position(&self, rank: usize, cell: &Cell) -> Option<usize> {
        self.cells(rank).iter().position(|c| c == cell)
    }

    /// Checks every invariant of a combinatorial complex. An empty report
    /// means the complex is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        let rank0 = self.cells(0);
        let mut has_singleton = vec![false; self.vertex_count];
        for c in rank0 {
            if c.len() == 1 {
                has_singleton[c.vertices()[0]] = true;
            } else {
                report.push(Violation::NonSingletonAtRankZero { cell: c.clone() });
            }
        }
        report.extend(
            has_singleton
                .iter()
                .enumerate()
                .filter(|(_, present)| !**present)
                .map(|(vertex, _)| Violation::MissingSingleton { vertex }),
        );

        let mut first_rank: HashMap<&Cell, usize> = HashMap::new();
        for (&rank, cells) in &self.ranks {
            let mut local = std::collections::HashSet::new();
            for c in cells {
                if !local.insert(c) {
                    report.push(Violation::DuplicateWithinRank { rank, cell: c.clone() });
                    continue;
                }
                if let Some(&r0) = first_rank.get(c) {
                    report.push(Violation::SameCellAtTwoRanks {
                        cell: c.clone(),
                        ranks: (r0, rank),
                    });
                } else {
                    first_rank.insert(c, rank);
                }
            }
        }

        // x ⊊ y must imply rk(x) <= rk(y): look for strict supersets at lower ranks.
        for (&lower, lower_cells) in &self.ranks {
            let index = ContainmentIndex::new(lower_cells);
            for (&higher, higher_cells) in self.ranks.range(lower + 1..) {
                for x in higher_cells {
                    for j in index.strict_supersets(x) {
                        report.push(Violation::ContainmentMonotonicity {
                            subset: x.clone(),
                            subset_rank: higher,
                            superset: lower_cells[j].clone(),
                            superset_rank: lower,
                        });
                    }
                }
            }
        }
        report
    }

    /// Returns `self` if valid, otherwise an error listing the violations.
    pub fn into_validated(self) -> Result<Self, ComplexError> {
        let report = self.validate();
        if report.is_empty() {
            Ok(self)
        } else {
            let msg: Vec<String> = report.iter().map(ToString::to_string).collect();
            Err(ComplexError::Invalid(msg.join("; ")))
        }
    }

    /// Reorders cells rank by rank. Ranks absent from `perms` keep their order.
    pub fn reindex(&self, perms: &BTreeMap<usize, Permutation>) -> Result<(Self, Reindexing), ComplexError> {
        let mut record = BTreeMap::new();
        let mut ranks = BTreeMap::new();
        for (&rank, cells) in &self.ranks {
            let perm = match perms.get(&rank) {
                Some(p) if p.len() == cells.len() => p.clone(),
                Some(_) => return Err(ComplexError::InvalidPermutation { rank, len: cells.len() }),
                None => Permutation::identity(cells.len()),
            };
            let mut reordered = cells.clone();
            for (old, cell) in cells.iter().enumerate() {
                reordered[perm.new_of_old[old]] = cell.clone();
            }
            ranks.insert(rank, reordered);
            record.insert(rank, perm);
        }
        if let Some(rank) = perms.keys().find(|r| !self.ranks.contains_key(r)) {
            return Err(ComplexError::InactiveRank(*rank));
        }
        Ok((
            Self {
                vertex_count: self.vertex_count,
                ranks,
            },
            Reindexing { perms: record },
        ))
    }

    /// Places the parts side by side, shifting vertex ids so they do not overlap.
    pub fn disjoint_union(parts: &[CombinatorialComplex]) -> Self {
        let mut ranks: BTreeMap<usize, Vec<Cell>> = BTreeMap::new();
        let mut offset = 0;
        for part in parts {
            for (&rank, cells) in &part.ranks {
                ranks.entry(rank).or_default().extend(
                    cells
                        .iter()
                        .map(|c| Cell(c.vertices().iter().map(|v| v + offset).collect())),
                );
            }
            offset += part.vertex_count;
        }
        Self {
            vertex_count: offset,
            ranks,
        }
    }

    pub fn to_json(&self) -> ComplexJson {
        ComplexJson {
            vertex_count: self.vertex_count,
            cells: self
                .ranks
                .iter()
                .map(|(&r, cells)| (r, cells.iter().map(|c| c.0.clone()).collect()))
                .collect(),
        }
    }

    /// Loads a complex, keeping the stored cell order.
    pub fn from_json(json: ComplexJson) -> Result<Self, ComplexError> {
        Self::from_ordered_cells(json.vertex_count, json.cells)
    }

    /// Per-rank cell counts, `(rank, n_rank)` in ascending rank order.
    pub fn counts(&self) -> Vec<(usize, usize)> {
        self.ranks.iter().map(|(&r, c)| (r, c.len())).collect()
    }
}

/// Adds cells one at a time; every singleton is present from the start.
#[derive(Debug)]
pub struct ComplexBuilder {
    vertex_count: usize,
    cells: BTreeMap<usize, Vec<Vec<usize>>>,
}

impl ComplexBuilder {
    pub fn new(vertex_count: usize) -> Self {
        let mut cells = BTreeMap::new();
        cells.insert(0, (0..vertex_count).map(|v| vec![v]).collect());
        Self { vertex_count, cells }
    }

    pub fn add_cell(&mut self, rank: usize, vertices: Vec<usize>) -> &mut Self {
        self.cells.entry(rank).or_default().push(vertices);
        self
    }

    pub fn add_cells(&mut self, rank: usize, cells: impl IntoIterator<Item = Vec<usize>>) -> &mut Self {
        self.cells.entry(rank).or_default().extend(cells);
        self
    }

    /// Canonicalizes and validates.
    pub fn build(self) -> Result<CombinatorialComplex, ComplexError> {
        CombinatorialComplex::from_cells(self.vertex_count, self.cells)?.into_validated()
    }
}

/// A bijection on `0..n`; `new_of_old[i]` is the new position of old item `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    new_of_old: Vec<usize>,
}

impl Permutation {
    pub fn new(new_of_old: Vec<usize>) -> Option<Self> {
        let n = new_of_old.len();
        let mut seen = vec![false; n];
        for &p in &new_of_old {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return None;
            }
        }
        Some(Self { new_of_old })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            new_of_old: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.new_of_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_of_old.is_empty()
    }

    pub fn new_index(&self, old: usize) -> usize {
        self.new_of_old[old]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.new_of_old
    }

    /// `P · x`: row `i` of `x` moves to row `new_index(i)`.
    pub fn apply_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.dim());
        for (old, &new) in self.new_of_old.iter().enumerate() {
            out.row_mut(new).assign(&x.row(old));
        }
        out
    }
}

/// The permutation applied at each active rank by [`CombinatorialComplex::reindex`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reindexing {
    pub perms: BTreeMap<usize, Permutation>,
}

impl Reindexing {
    pub fn rank(&self, rank: usize) -> Option<&Permutation> {
        self.perms.get(&rank)
    }
}
