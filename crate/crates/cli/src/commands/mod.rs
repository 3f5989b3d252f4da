pub mod curvature;
pub mod fixtures;
pub mod flow;
pub mod gauduchon;
pub mod scan;
pub mod schwarz;

use curvlab_core::{ComplexTensor, C64};

/// `t[i][j][k]` for a rank-3 tensor of dimension `n`.
pub fn nest3(t: &ComplexTensor, n: usize) -> Vec<Vec<Vec<C64>>> {
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| t[[i, j, k]]).collect()).collect()).collect()
}

pub fn nest4(t: &ComplexTensor, n: usize) -> Vec<Vec<Vec<Vec<C64>>>> {
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| (0..n).map(|l| t[[i, j, k, l]]).collect()).collect()).collect())
        .collect()
}

/// Passes when `value` is finite and at most `tol`.
pub fn within(value: f64, tol: f64) -> bool {
    value.is_finite() && value <= tol
}
