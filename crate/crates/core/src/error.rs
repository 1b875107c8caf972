use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symmetric (max |w_ij - w_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("matrix rows do not sum to one (max deviation {0:e})")]
    RowSums(f64),

    #[error("eigensolver did not converge after {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("spectral parameter zeta = {0} must be < 1")]
    ZetaOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("objective has no finite lower bound: {0}")]
    Unbounded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
