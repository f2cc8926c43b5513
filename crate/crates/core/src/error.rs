use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index {index} out of range for {len} grid points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("coefficient evaluation failed at t={t}, y={state}: {detail}")]
    CoefficientEvaluation {
        t: f64,
        state: String,
        detail: String,
    },

    #[error("cholesky factorization failed: {0}")]
    Cholesky(String),

    #[error("solver failure: {message}")]
    SolverFailure {
        message: String,
        /// Residual history of the last attempted window.
        history: Vec<f64>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
