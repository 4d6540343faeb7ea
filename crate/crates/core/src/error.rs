use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("instance too large for {method}: {reason}")]
    TooLarge { method: &'static str, reason: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("infeasible constraint: {0}")]
    Infeasible(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
