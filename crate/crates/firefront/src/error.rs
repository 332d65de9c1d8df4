use thiserror::Error;

#[derive(Debug, Error)]
pub enum FireError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("parse error in {file} at line {line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
