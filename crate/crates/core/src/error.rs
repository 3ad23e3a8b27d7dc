use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    /// Malformed input file; `row` is the 1-based data row (0 for the header).
    #[error("format error at row {row}: {msg}")]
    Format { row: usize, msg: String },

    #[error("unsupported architecture: {0}")]
    UnsupportedArch(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for failures of the numerical routines themselves, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::NonConvergence(_))
    }
}
