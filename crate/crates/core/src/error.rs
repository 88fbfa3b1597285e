use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum RvgpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for {len} {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("duplicate points at rows {first} and {second}")]
    DuplicatePoints { first: usize, second: usize },

    #[error("non-finite coordinate at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("proximity graph has {components} connected components")]
    Disconnected { components: usize },

    #[error("node {node} has no incident edges")]
    IsolatedNode { node: usize },

    #[error("degenerate local geometry at node {node}: neighbor matrix rank {rank} < {required}")]
    DegenerateFrame {
        node: usize,
        rank: usize,
        required: usize,
    },

    #[error("tangent spaces at nodes {from} and {to} are (nearly) orthogonal; graph too coarse")]
    DegenerateTransport { from: usize, to: usize },

    #[error("missing transport on edge ({i}, {j})")]
    MissingTransport { i: usize, j: usize },

    #[error("eigensolver did not converge after {matvecs} products (max residual {residual:e})")]
    NoConvergence { matvecs: usize, residual: f64 },

    #[error("Cholesky failed up to jitter {jitter:e} (diagonal range {min_diag:e}..{max_diag:e})")]
    NotPositiveDefinite {
        jitter: f64,
        min_diag: f64,
        max_diag: f64,
    },

    #[error("hyperparameter objective was NaN at every evaluated point")]
    ObjectiveUndefined,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("node id mismatch; first offenders: {0:?}")]
    IdMismatch(Vec<String>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = RvgpError> = std::result::Result<T, E>;

impl RvgpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RvgpError::Io {
            path: path.into(),
            source,
        }
    }
}
