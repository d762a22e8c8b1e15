use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands do not have compatible shapes.
    #[error("conformability error: {what} (expected {expected}, found {found})")]
    Conformability {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// An input violates a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A linear system is singular or too ill-conditioned to solve exactly.
    #[error("degenerate system: {context} (condition estimate {condition:e}); {hint}")]
    Degenerate {
        context: &'static str,
        condition: f64,
        hint: &'static str,
    },

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Non-finite values or a solver that failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown id: {0}")]
    UnknownId(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Conformability {
            what,
            expected,
            found,
        });
    }
    Ok(())
}
