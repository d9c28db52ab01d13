use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge after {terms} terms (partial value {partial})")]
    NonConvergence { terms: usize, partial: f64 },

    #[error("truncation N = {trunc} leaves tail weight {tail:e}; need N >= {required}")]
    Truncation {
        trunc: usize,
        tail: f64,
        required: usize,
    },

    #[error("matrix dimension {dim} exceeds cap {cap}")]
    Resource { dim: usize, cap: usize },

    #[error("numerical integrity: {0}")]
    NumericalIntegrity(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("normalization: {0}")]
    Normalization(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
