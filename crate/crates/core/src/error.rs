//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// CSV header / column-structure problems.
    #[error("schema error: {0}")]
    Schema(String),

    /// Row-level parse failures (bad numbers, non-binary values).
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// Structural invariant violations in loaded or constructed data.
    #[error("validation error: {0}")]
    Validation(String),

    /// A precondition of an operation was not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A cluster endpoint is undefined (e.g. nobody measured).
    #[error("endpoint undefined for cluster {cluster}: {reason}")]
    EndpointUndefined { cluster: String, reason: String },

    /// An iterative solver failed to converge.
    #[error("non-convergence: {context} (final residual {residual:.3e})")]
    NonConvergence { context: String, residual: f64 },

    /// Numerical failure not covered by a more specific variant.
    #[error("computation error: {0}")]
    Computation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
