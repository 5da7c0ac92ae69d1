//! Error type shared by all modules.

use thiserror::Error;

/// Crate-wide error enumeration. The CLI maps each variant onto a distinct
/// process exit code, so variants are grouped by failure kind rather than by
/// module.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A parameter violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request exceeds the configured size caps.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A numerical kernel failed (eigendecomposition, singular matrix, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iterative solver ran out of iterations.
    #[error(
        "did not converge: best residual {residual:.3e} after {iterations} iterations{hint}"
    )]
    NonConvergence {
        residual: f64,
        iterations: usize,
        hint: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CoreError::Domain(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        CoreError::Capacity(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CoreError::Numerical(msg.into())
    }
}
