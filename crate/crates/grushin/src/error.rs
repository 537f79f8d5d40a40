use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum GrushinError {
    /// A parameter violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A spectral truncation could not meet the requested tail tolerance.
    #[error("truncation at K = {kmax} leaves relative tail {tail:.3e} above tolerance {tol:.3e}")]
    TailTolerance { kmax: usize, tail: f64, tol: f64 },

    /// A linear solve hit a (near-)singular system.
    #[error("singular or near-singular system: {0}")]
    Singular(String),

    /// Requested resolution or mode content exceeds what the operation supports.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, GrushinError>;
