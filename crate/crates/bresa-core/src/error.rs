use thiserror::Error;

/// Error type shared across the crate.
///
/// The variants map onto the CLI exit-code categories: configuration,
/// IO, and runtime failures.
#[derive(Debug, Error)]
pub enum BresaError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Recoverable "not enough data yet" signal (e.g. underfull replay buffer).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("runtime error: {0}")]
    Runtime(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BresaError>;

impl BresaError {
    /// Coarse failure category, used by the CLI to pick an exit code.
    pub fn category(&self) -> ErrorCategory {
        match self {
            BresaError::Config(_) | BresaError::Shape(_) => ErrorCategory::Config,
            BresaError::Io(_) | BresaError::Dataset(_) | BresaError::Checkpoint(_) => {
                ErrorCategory::Io
            }
            BresaError::InsufficientData(_) | BresaError::Runtime(_) => ErrorCategory::Runtime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Runtime,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Runtime => 4,
        }
    }
}
