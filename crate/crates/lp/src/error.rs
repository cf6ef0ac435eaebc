use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("MPS line {line}: {message}")]
    Mps { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
