//! Kernel sensor fusion under the null: NCCA and alternating-diffusion
//! matrices, their limiting spectra through free multiplicative convolution,
//! and an eigenvalue-ratio independence test calibrated by resampling.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
mod linalg;

pub mod kernelgraph;
pub mod rngkit;
pub mod freeprob;
pub mod spectra;
pub mod fusion;
pub mod inference;
pub mod verify;

pub use error::{Error, Result};
pub use fusion::{FusionKind, FusionMatrix};
pub use inference::{CalibrationTable, RatioStatistic, TestOutcome};
pub use kernelgraph::{AffinityBundle, Gaussian, Kernel, KernelFn, ShiftDecomposition};
pub use num_complex::Complex64;
pub use rngkit::{DataCloud, Purpose, SeedSpec};
pub use spectra::{EmpiricalMeasure, Spectrum};
