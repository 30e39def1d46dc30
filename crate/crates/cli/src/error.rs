use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Io(_) => 3,
            Self::Resource(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Io(format!("{}: {err}", path.display()))
    }
}

impl From<dqps_core::Error> for CliError {
    fn from(err: dqps_core::Error) -> Self {
        use dqps_core::Error as E;
        match err {
            E::WorkLimit { .. } | E::Overflow(_) => Self::Resource(err.to_string()),
            _ => Self::Validation(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
