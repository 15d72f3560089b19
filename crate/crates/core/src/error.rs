use thiserror::Error;

/// Errors raised by the estimation, selection, clustering and I/O layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IcsError {
    #[error("validation error: {0}")]
    Validation(String),

    /// A matrix that must be invertible is numerically singular.
    #[error("singular matrix: eigenvalue {eigenvalue:e} is below the cutoff {cutoff:e} ({context})")]
    Singular {
        eigenvalue: f64,
        cutoff: f64,
        context: String,
    },

    #[error("matrix is not positive definite: smallest eigenvalue {smallest:e} ({context})")]
    NotPositiveDefinite { smallest: f64, context: String },

    #[error("column {column} has zero scale")]
    DegenerateColumn { column: usize },

    #[error("local covariance of observation {observation} is singular")]
    DegenerateNeighborhood { observation: usize },

    /// Carries the last iterate so callers can inspect or restart from it.
    #[error("{estimator} did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged {
        estimator: String,
        iterations: usize,
        last_change: f64,
        last_location: Vec<f64>,
        last_scatter: Vec<f64>,
    },

    #[error("reweighting retained {retained} observations, at least {required} needed")]
    DegenerateWeighting { retained: usize, required: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A selection criterion kept no component.
    #[error("no component was selected")]
    EmptySelection,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid spec `{spec}`: {message}")]
    Spec { spec: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, IcsError>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(IcsError::Validation(msg.into()))
}

impl From<std::io::Error> for IcsError {
    fn from(e: std::io::Error) -> Self {
        IcsError::Io(e.to_string())
    }
}
