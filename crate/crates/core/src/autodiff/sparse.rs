use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Compressed sparse row matrix. Used as non-trainable graph structure.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates the CSR invariants: offsets non-decreasing with length
    /// `rows + 1`, column indices in range and strictly increasing per row.
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(Error::InvalidSparse(format!(
                "row offsets have length {}, expected {}",
                row_offsets.len(),
                rows + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets[rows] != col_indices.len() {
            return Err(Error::InvalidSparse("row offsets do not span the entries".into()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidSparse("column/value length mismatch".into()));
        }
        for r in 0..rows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::InvalidSparse(format!("row offsets decrease at row {r}")));
            }
            let row = &col_indices[lo..hi];
            if let Some(&c) = row.iter().find(|&&c| c >= cols) {
                return Err(Error::InvalidSparse(format!("column {c} out of range at row {r}")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSparse(format!(
                    "row {r} has unsorted or duplicate columns"
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets in any order. Duplicates are rejected.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = sorted.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidSparse(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_offsets = vec![0; rows + 1];
        for &(r, _, _) in &sorted {
            if r >= rows {
                return Err(Error::InvalidSparse(format!("row {r} out of range")));
            }
            row_offsets[r + 1] += 1;
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        let col_indices = sorted.iter().map(|t| t.1).collect();
        let values = sorted.iter().map(|t| t.2).collect();
        Self::new(rows, cols, row_offsets, col_indices, values)
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values stored in row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).0.binary_search(&c).is_ok()
    }

    /// Number of stored entries in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        self.row_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of stored entries in each column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cols];
        for &c in &self.col_indices {
            counts[c] += 1;
        }
        counts
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Same structure with every value replaced by `f(row, col, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let values = self.iter().map(|(r, c, v)| f(r, c, v)).collect();
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn transpose(&self) -> Self {
        let mut row_offsets = vec![0; self.cols + 1];
        for &c in &self.col_indices {
            row_offsets[c + 1] += 1;
        }
        for c in 0..self.cols {
            row_offsets[c + 1] += row_offsets[c];
        }
        let mut next = row_offsets.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in ascending order, so each output row stays sorted.
        for (r, c, v) in self.iter() {
            let slot = next[c];
            col_indices[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.rows, self.cols]);
        let cols = self.cols;
        let data = t.data_mut();
        for (r, c, v) in self.iter() {
            data[r * cols + c] = v;
        }
        t
    }

    /// out[rows×p] += self · b[cols×p]
    pub(crate) fn mul_dense_acc(&self, b: &[f64], p: usize, out: &mut [f64]) {
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let out_row = &mut out[r * p..(r + 1) * p];
            for (&c, &v) in cols.iter().zip(vals) {
                let b_row = &b[c * p..(c + 1) * p];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += v * bv;
                }
            }
        }
    }

    /// out[cols×p] += selfᵀ · g[rows×p]
    pub(crate) fn transpose_mul_dense_acc(&self, g: &[f64], p: usize, out: &mut [f64]) {
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let g_row = &g[r * p..(r + 1) * p];
            for (&c, &v) in cols.iter().zip(vals) {
                let out_row = &mut out[c * p..(c + 1) * p];
                for (o, &gv) in out_row.iter_mut().zip(g_row) {
                    *o += v * gv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_structure() {
        assert!(SparseMatrix::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(SparseMatrix::new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(SparseMatrix::new(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
    }

    #[test]
    fn transpose_round_trips() {
        let s = SparseMatrix::from_triplets(3, 4, &[(0, 3, 1.0), (2, 0, 2.0), (1, 3, -1.5), (2, 3, 4.0)])
            .unwrap();
        let t = s.transpose();
        assert_eq!(t.rows(), 4);
        assert_eq!(t.to_dense(), s.to_dense().transpose().unwrap());
        assert_eq!(t.transpose(), s);
        assert_eq!(s.row_counts(), vec![1, 1, 2]);
        assert_eq!(s.col_counts(), vec![1, 0, 0, 3]);
    }
}
