//! Compressed sparse row matrices and their products with dense matrices.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::TensorError;

/// A real sparse matrix in CSR layout.
///
/// Column indices within a row are strictly increasing, so iteration order
/// (and therefore every reduction built on it) is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Serialized form: `{"shape": [m, n], "triplets": [[i, j, v], ...]}` sorted by `(i, j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseJson {
    pub shape: [usize; 2],
    pub triplets: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate coordinates
    /// are summed; explicit zeros are kept so patterns survive normalization.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, TensorError> {
        let mut trips: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, _) in &trips {
            if i >= rows || j >= cols {
                return Err(TensorError::IndexOutOfBounds {
                    index: (i, j),
                    shape: (rows, cols),
                });
            }
        }
        trips.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trips {
            if last == Some((i, j)) {
                *values.last_mut().expect("nonempty after first entry") += v;
                continue;
            }
            last = Some((i, j));
            indptr[i + 1] += 1;
            indices.push(j);
            values.push(v);
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Self {
        let trips = dense
            .indexed_iter()
            .filter(|(_, v)| **v != 0.0)
            .map(|((i, j), v)| (i, j, *v));
        Self::from_triplets(dense.nrows(), dense.ncols(), trips).expect("indices come from the array")
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as `(col, value)` pairs in increasing column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All entries as `(row, col, value)` sorted by `(row, col)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    /// Sparsity pattern as sorted coordinates.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.triplets().into_iter().map(|(i, j, _)| (i, j)).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (i, j, v) in self.triplets() {
            out[[i, j]] += v;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.cols,
            self.rows,
            self.triplets().into_iter().map(|(i, j, v)| (j, i, v)),
        )
        .expect("transposed indices are in range")
    }

    /// Returns a copy with every value replaced by `f(row, col, value)`; the pattern is unchanged.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.values[k] = f(i, self.indices[k], self.values[k]);
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (_, j, v) in self.triplets() {
            sums[j] += v;
        }
        sums
    }

    /// `self · x`.
    pub fn mul_dense(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, TensorError> {
        if x.nrows() != self.cols {
            return Err(TensorError::ShapeMismatch {
                op: "sparse_matmul",
                left: self.shape(),
                right: x.dim(),
            });
        }
        let mut out = Array2::zeros((self.rows, x.ncols()));
        for i in 0..self.rows {
            let mut out_row = out.row_mut(i);
            for (j, v) in self.row(i) {
                out_row.scaled_add(v, &x.row(j));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x`, computed by scattering rows; no transposed copy is built.
    pub fn mul_dense_transposed(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, TensorError> {
        if x.nrows() != self.rows {
            return Err(TensorError::ShapeMismatch {
                op: "sparse_matmul_transposed",
                left: (self.cols, self.rows),
                right: x.dim(),
            });
        }
        let mut out = Array2::zeros((self.cols, x.ncols()));
        for i in 0..self.rows {
            let x_row = x.row(i);
            for (j, v) in self.row(i) {
                out.row_mut(j).scaled_add(v, &x_row);
            }
        }
        Ok(out)
    }

    /// Sparse–sparse product `self · other`.
    pub fn mul_sparse(&self, other: &SparseMatrix) -> Result<SparseMatrix, TensorError> {
        if self.cols != other.rows {
            return Err(TensorError::ShapeMismatch {
                op: "sparse_sparse_matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut trips = Vec::new();
        let mut acc = vec![0.0; other.cols];
        let mut touched = vec![false; other.cols];
        let mut cols_hit = Vec::new();
        for i in 0..self.rows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        cols_hit.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols_hit.sort_unstable();
            for &j in &cols_hit {
                trips.push((i, j, acc[j]));
                acc[j] = 0.0;
                touched[j] = false;
            }
            cols_hit.clear();
        }
        SparseMatrix::from_triplets(self.rows, other.cols, trips)
    }

    pub fn to_json(&self) -> SparseJson {
        SparseJson {
            shape: [self.rows, self.cols],
            triplets: self.triplets(),
        }
    }

    pub fn from_json(json: &SparseJson) -> Result<Self, TensorError> {
        Self::from_triplets(json.shape[0], json.shape[1], json.triplets.iter().copied())
    }
}
