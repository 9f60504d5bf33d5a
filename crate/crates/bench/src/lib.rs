//! Shared fixtures for the criterion benches.

use fusionspec::inference::{draw_pair, DrawModel};
use fusionspec::{DataCloud, KernelFn};

pub const SEED: u64 = 20200731;

/// A null pair with `p₁ = p₂ = p`.
pub fn null_pair(n: usize, p: usize) -> (DataCloud, DataCloud) {
    draw_pair(DrawModel::Null, n, p, p, SEED, 0).expect("valid dimensions")
}

pub fn kernel() -> KernelFn {
    KernelFn::gaussian(1.0).expect("positive bandwidth")
}
