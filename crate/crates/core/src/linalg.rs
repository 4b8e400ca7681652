//! Small dense helpers shared by the gain, graph and bounds modules.

use alloc::vec::Vec;
use nalgebra::DMatrix;

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;

/// Induced ∞-norm: the largest absolute row sum.
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `m ⊗ I_n`.
pub fn kron_identity(m: &Matrix, n: usize) -> Matrix {
    m.kronecker(&Matrix::identity(n, n))
}

/// Block-diagonal assembly of equally sized square blocks.
pub fn block_diagonal(blocks: &[Matrix]) -> Matrix {
    let sizes: Vec<usize> = blocks.iter().map(|b| b.nrows()).collect();
    let total = sizes.iter().sum();
    let mut out = Matrix::zeros(total, total);
    let mut offset = 0;
    for block in blocks {
        let k = block.nrows();
        out.view_mut((offset, offset), (k, k)).copy_from(block);
        offset += k;
    }
    out
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut eig: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Largest absolute asymmetry `max |m_ij - m_ji|`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
