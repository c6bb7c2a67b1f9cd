use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes. Usage errors reported by the argument parser exit
/// with 2.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 3;
    pub const METADATA_MISMATCH: i32 = 4;
    pub const COLLISION: i32 = 5;
}

#[derive(Debug, Error)]
pub enum AppError {
    /// Unparsable or out-of-range configuration, with the offending line.
    #[error("{path}:{line}:{column}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    /// An artifact was produced for a different setup than the one loading it.
    #[error("{path}: {message}")]
    MetadataMismatch { path: PathBuf, message: String },
    /// Evaluation finished but at least one run collided.
    #[error("{0}")]
    Collision(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] aseq_core::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config { .. } => exit::CONFIG,
            AppError::MetadataMismatch { .. } => exit::METADATA_MISMATCH,
            AppError::Collision(_) => exit::COLLISION,
            _ => exit::FAILURE,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        AppError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
