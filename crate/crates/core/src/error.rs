use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RisError {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e} exceeds {tolerance:e})")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite; the linear system is singular")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("unknown {kind} `{name}`; valid names: {}", valid.join(", "))]
    UnknownName {
        kind: &'static str,
        name: String,
        valid: Vec<String>,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RisError {
    fn from(e: std::io::Error) -> Self {
        RisError::Io(e.to_string())
    }
}

pub type Result<T, E = RisError> = std::result::Result<T, E>;
