use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the retrieval library.
///
/// The CLI maps these onto exit codes: configuration and parse problems are
/// exit 2, numerical failures exit 3, and I/O failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on {axis}: expected {expected}, got {actual}")]
    DimensionMismatch {
        axis: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("non-finite value in {what} at index {index}")]
    NonFiniteAt { what: &'static str, index: usize },

    #[error("matrix is not positive definite: {context}")]
    NotPositiveDefinite { context: String },

    #[error("singular triangular factor in {context}")]
    SingularFactor { context: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("synthetic problem generation failed: {0}")]
    Infeasible(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn not_positive_definite(context: impl Into<String>) -> Self {
        Error::NotPositiveDefinite {
            context: context.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
