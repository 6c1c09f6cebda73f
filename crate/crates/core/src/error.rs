use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SarError>;

#[derive(Debug, Error)]
pub enum SarError {
    #[error("series of length {len} is too short for AR order {order} (need length > order)")]
    TooShort { len: usize, order: usize },

    #[error("segment length {segment_length} yields no complete segment from a series of length {len}")]
    NoSegments { len: usize, segment_length: usize },

    #[error("series is empty")]
    EmptySeries,

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Gram systems have mixed orders: expected {expected}, found {found}")]
    MixedOrders { expected: usize, found: usize },

    #[error("sparsity {tau} exceeds the candidate set size {candidates}")]
    SparsityTooLarge { tau: usize, candidates: usize },

    #[error("lag {lag} is not in the support set (available lags: {available:?})")]
    LagNotInSupport { lag: usize, available: Vec<usize> },

    #[error("grid has no unmasked cells")]
    EmptyGrid,

    #[error("cell (m={m}, n={n}, gamma={gamma}) has length {len} but segment {gamma} expects {expected}")]
    InconsistentCell {
        m: usize,
        n: usize,
        gamma: usize,
        len: usize,
        expected: usize,
    },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: file contains no data rows")]
    EmptyFile { path: PathBuf },

    #[error("{path}: cell (m={m}, n={n}, gamma={gamma}) does not cover t = 1..{expected}")]
    RaggedCell {
        path: PathBuf,
        m: usize,
        n: usize,
        gamma: usize,
        expected: usize,
    },

    #[error("planted coefficients sum to {sum}, which exceeds 1 (unstable recursion)")]
    Unstable { sum: f64 },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
