use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::instance::ValidationReport;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid instance:\n{0}")]
    Invalid(ValidationReport),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown disruption profile `{0}` (expected paper-like, mild or none)")]
    Profile(String),
    #[error("search space of {estimate:.3e} assignments exceeds the limit of {limit:.0e}")]
    SearchSpace { estimate: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Lp(#[from] gsc_lp::LpError),
}

impl CoreError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
