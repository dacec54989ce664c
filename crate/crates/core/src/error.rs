use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// The dataset does not form a complete tensor-product mesh.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("no cells along axis {axis} (needs at least 2 points, found {points})")]
    NoCells { axis: usize, points: usize },

    #[error("axis {axis} has {points} points; sensors require at least 3")]
    TooFewPoints { axis: usize, points: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cholesky factorization failed at pivot {pivot} (jitter {jitter:e})")]
    NotPositiveDefinite { pivot: usize, jitter: f64 },

    #[error("sensor denominator {value:e} at flat index {index} is not positive")]
    DegenerateDenominator { index: usize, value: f64 },

    #[error("objective returned a non-finite value at evaluation {eval}")]
    NonFiniteObjective { eval: usize },

    /// Configuration rejected before any computation; `pointer` is a JSON pointer.
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
