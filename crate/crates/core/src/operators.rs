//! Incidence matrices between ranks and the adjacencies they induce.

use serde::{Deserialize, Serialize};
use topounet_tensor::SparseMatrix;

use crate::complex::{CombinatorialComplex, ContainmentIndex};
use crate::error::ComplexError;

/// How incidence weights are scaled when features move between ranks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Every incident pair has weight 1 (sum aggregation).
    Raw,
    /// Each receiving cell averages the cells incident to it: column-normalized
    /// going up, row-normalized going down.
    #[default]
    #[serde(alias = "row_mean_down_col_mean_up")]
    Mean,
}

/// `B_{r,r'}`: `n_r × n_{r'}` with a nonzero at `(i, j)` iff cell `i` of the
/// lower rank is a strict subset of cell `j` of the upper rank.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceOperator {
    pub lower_rank: usize,
    pub upper_rank: usize,
    pub normalization: Normalization,
    raw: SparseMatrix,
}

impl IncidenceOperator {
    pub fn shape(&self) -> (usize, usize) {
        self.raw.shape()
    }

    /// The 0/1 matrix.
    pub fn raw(&self) -> &SparseMatrix {
        &self.raw
    }

    /// Matrix applied to lower-rank features to produce upper-rank features
    /// (`n_upper × n_lower`).
    pub fn upward(&self) -> SparseMatrix {
        let bt = self.raw.transpose();
        match self.normalization {
            Normalization::Raw => bt,
            Normalization::Mean => row_normalize(&bt),
        }
    }

    /// Matrix applied to upper-rank features to produce lower-rank features
    /// (`n_lower × n_upper`).
    pub fn downward(&self) -> SparseMatrix {
        match self.normalization {
            Normalization::Raw => self.raw.clone(),
            Normalization::Mean => row_normalize(&self.raw),
        }
    }

    /// Lower-rank cell indices incident to each upper-rank cell.
    pub fn incident_lower(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.raw.ncols()];
        for (i, j, _) in self.raw.triplets() {
            out[j].push(i);
        }
        out
    }
}

/// Divides each row by its sum; empty rows stay empty.
pub fn row_normalize(m: &SparseMatrix) -> SparseMatrix {
    let sums = m.row_sums();
    m.map_values(|i, _, v| v / sums[i])
}

/// `A_{r|q}`, symmetric `n_r × n_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyOperator {
    pub rank: usize,
    pub via_rank: usize,
    pub matrix: SparseMatrix,
}

/// Builds `B_{lower,upper}`.
pub fn incidence(
    cc: &CombinatorialComplex,
    lower_rank: usize,
    upper_rank: usize,
    normalization: Normalization,
) -> Result<IncidenceOperator, ComplexError> {
    if lower_rank >= upper_rank {
        return Err(ComplexError::RankOrder {
            lower: lower_rank,
            upper: upper_rank,
        });
    }
    cc.require_active(lower_rank)?;
    cc.require_active(upper_rank)?;
    let lower = cc.cells(lower_rank);
    let upper = cc.cells(upper_rank);
    let index = ContainmentIndex::new(upper);
    let mut trips = Vec::new();
    for (i, x) in lower.iter().enumerate() {
        trips.extend(index.strict_supersets(x).into_iter().map(|j| (i, j, 1.0)));
    }
    let raw = SparseMatrix::from_triplets(lower.len(), upper.len(), trips).expect("indices come from the cell lists");
    Ok(IncidenceOperator {
        lower_rank,
        upper_rank,
        normalization,
        raw,
    })
}

/// `A_{rank|via}`: `B Bᵀ` through a higher rank, `Bᵀ B` through a lower one.
pub fn adjacency(cc: &CombinatorialComplex, rank: usize, via_rank: usize) -> Result<AdjacencyOperator, ComplexError> {
    if rank == via_rank {
        return Err(ComplexError::SameRank(rank));
    }
    let matrix = if via_rank > rank {
        let b = incidence(cc, rank, via_rank, Normalization::Raw)?;
        b.raw().mul_sparse(&b.raw().transpose())
    } else {
        let b = incidence(cc, via_rank, rank, Normalization::Raw)?;
        b.raw().transpose().mul_sparse(b.raw())
    }
    .expect("inner dimensions agree by construction");
    Ok(AdjacencyOperator { rank, via_rank, matrix })
}
