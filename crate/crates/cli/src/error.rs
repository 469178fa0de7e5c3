use std::path::PathBuf;

use fms::FmsError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    /// Success; for `fit`, the iteration converged.
    pub const OK: u8 = 0;
    /// `fit` stopped at `--max-iters` before meeting `--step-tol`.
    pub const MAX_ITERS: u8 = 2;
    /// Bad flags or parameters, including outlier fractions past the bound.
    pub const USAGE: u8 = 10;
    /// Unreadable or malformed input file.
    pub const INPUT: u8 = 11;
    /// Numerical failure while fitting (degenerate data, SVD failure).
    pub const NUMERICAL: u8 = 12;
    /// Outputs could not be written.
    pub const OUTPUT: u8 = 13;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Fms(#[from] FmsError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Input {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Input { .. } => exit::INPUT,
            CliError::Fms(
                FmsError::Dimension(_)
                | FmsError::InvalidParameter(_)
                | FmsError::BoundViolation { .. },
            ) => exit::USAGE,
            CliError::Fms(_) => exit::NUMERICAL,
            CliError::Output { .. } => exit::OUTPUT,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
