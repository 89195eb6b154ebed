//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("composition error: {0}")]
    Composition(String),

    #[error("causality violation: {0}")]
    Causality(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
