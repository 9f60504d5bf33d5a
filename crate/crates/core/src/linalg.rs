//! Thin helpers over `faer` with parallelism pinned to sequential so every
//! product is bit-reproducible regardless of the surrounding thread pool.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};

pub(crate) fn mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// `XᵀX` for a `p x n` data matrix.
pub(crate) fn gram(x: MatRef<'_, f64>) -> Mat<f64> {
    mul(x.transpose(), x)
}

pub(crate) fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].abs());
        }
    }
    best
}

#[cfg(test)]
pub(crate) fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    best
}

pub(crate) fn asymmetry(m: MatRef<'_, f64>) -> f64 {
    let n = m.nrows();
    let mut best = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            best = best.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    best
}

pub(crate) fn trace(m: MatRef<'_, f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `tr(M²) = Σᵢⱼ Mᵢⱼ Mⱼᵢ` without forming the square.
pub(crate) fn trace_of_square(m: MatRef<'_, f64>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += m[(i, j)] * m[(j, i)];
        }
    }
    acc
}

pub(crate) fn all_finite(m: MatRef<'_, f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

/// Scales row `i` by `d[i]`.
pub(crate) fn scale_rows(m: &mut Mat<f64>, d: &[f64]) {
    for j in 0..m.ncols() {
        for (i, &s) in d.iter().enumerate() {
            m[(i, j)] *= s;
        }
    }
}

/// Scales column `j` by `d[j]`.
pub(crate) fn scale_cols(m: &mut Mat<f64>, d: &[f64]) {
    for (j, &s) in d.iter().enumerate() {
        for i in 0..m.nrows() {
            m[(i, j)] *= s;
        }
    }
}
