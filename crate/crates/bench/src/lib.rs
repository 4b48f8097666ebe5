//! Fixtures shared by the benchmarks.

use mbgmn_core::data::{generate_synthetic, leave_one_out_split, SynthSpec};
use mbgmn_core::{Result, SparseMatrix, SplitDataset, Tensor};

/// Deterministic sparse matrix with about `nnz` entries.
pub fn sparse(rows: usize, cols: usize, nnz: usize) -> Result<SparseMatrix> {
    let mut triplets: Vec<(usize, usize, f64)> = (0..nnz)
        .map(|n| {
            let h = (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            ((h >> 20) as usize % rows, (h >> 40) as usize % cols, 1.0 / (1 + n % 7) as f64)
        })
        .collect();
    triplets.sort_by_key(|t| (t.0, t.1));
    triplets.dedup_by_key(|t| (t.0, t.1));
    SparseMatrix::from_triplets(rows, cols, &triplets)
}

pub fn dense(rows: usize, cols: usize) -> Result<Tensor> {
    let data = (0..rows * cols).map(|n| ((n % 13) as f64 - 6.0) * 0.05).collect();
    Tensor::new(vec![rows, cols], data)
}

pub fn synthetic_split(users: usize, items: usize, density: f64) -> Result<SplitDataset> {
    let spec = SynthSpec::new(users, items, &["view", "cart", "buy"], "buy", density, 0.8, 5)?;
    let data = generate_synthetic(&spec)?;
    leave_one_out_split(&data.tensor, 5)
}
