//! Crate-wide error type and the process exit codes it maps to.

use std::path::PathBuf;

/// Errors surfaced by configuration loading, checkpoint IO and the
/// training/evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration file is missing, unparsable, or violates an invariant.
    /// `field` carries the dotted path of the offending key when known.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A configuration or checkpoint file could not be read.
    #[error("cannot read {path}: {source}")]
    FileRead {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Two inputs that must describe the same thing do not match
    /// (e.g. evaluation reports over different scenario seeds).
    #[error("input mismatch: {0}")]
    InputMismatch(String),

    /// A numerical failure: non-finite loss or reward, or a failed
    /// gradient check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 mismatch, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::FileRead { .. } => 2,
            Error::InputMismatch(_) => 3,
            Error::Numerical(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
