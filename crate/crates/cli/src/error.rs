use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("solver did not converge within {0} iterations; artifacts were written with converged = false")]
    NotConverged(usize),
}

impl CliError {
    /// 1 for usage errors, 2 for bad data or I/O, 3 when the solver gave up.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NotConverged(_) => 3,
            CliError::Data(_) | CliError::Row { .. } | CliError::Io { .. } => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<cfair::Error> for CliError {
    fn from(e: cfair::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
