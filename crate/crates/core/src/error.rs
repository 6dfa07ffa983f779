use thiserror::Error;

pub type Result<T> = std::result::Result<T, SveError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SveError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("sum-of-exponentials certification failed: achieved {achieved:e}, requested {eps:e}")]
    SoeBuildFailure { achieved: f64, eps: f64 },

    #[error("adaptive quadrature did not converge (estimated error {estimate:e})")]
    QuadratureNonConvergence { estimate: f64 },

    #[error("{failed} of {total} Monte Carlo paths failed, above the exclusion threshold")]
    NumericalFailure { failed: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SveError {
    fn from(e: std::io::Error) -> Self {
        SveError::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> SveError {
    SveError::InvalidParameter(msg.into())
}

impl SveError {
    /// Process exit status for this error: 1 invalid input, 2 numerical
    /// failure, 3 expansion certification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            SveError::InvalidParameter(_)
            | SveError::IndexOutOfRange(_)
            | SveError::DimensionMismatch { .. }
            | SveError::Io(_) => 1,
            SveError::NonFinite { .. }
            | SveError::QuadratureNonConvergence { .. }
            | SveError::NumericalFailure { .. } => 2,
            SveError::SoeBuildFailure { .. } => 3,
        }
    }
}
