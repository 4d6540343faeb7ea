use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Core(#[from] ealab::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("missing artifacts in {dir}: {}", missing.join(", "))]
    Missing { dir: PathBuf, missing: Vec<String> },
}

impl RunError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        Self::Format { path: path.to_path_buf(), reason: reason.into() }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;
