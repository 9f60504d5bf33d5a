use num_complex::Complex64;
use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("kernel condition violated: {0}")]
    KernelCondition(String),

    #[error("degenerate degree at row {row}: D = {degree:e}")]
    DegenerateDegree { row: usize, degree: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigensolver did not converge for a {dim}x{dim} matrix")]
    Solver {
        dim: usize,
        /// Eigenvalues that were available when the solver gave up, if any.
        partial: Option<Vec<Complex64>>,
    },

    #[error("subordination solver did not converge after {iterations} iterations (residual {residual:e})")]
    Subordination { iterations: usize, residual: f64 },

    #[error("spectral parameter outside the domain: {0}")]
    Domain(String),

    #[error("transform inversion failed: {0}")]
    TransformDomain(String),

    #[error("density inversion quality check failed: renormalization factor {factor}")]
    InversionQuality { factor: f64 },

    #[error("degenerate spectrum: Re(lambda_{index}) = 0")]
    DegenerateSpectrum { index: usize },

    #[error("calibration mismatch: {0}")]
    CalibrationMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures caused by the environment (files, serialization
    /// streams) rather than by the numerics or the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}
