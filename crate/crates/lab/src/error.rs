use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config error at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{experiment}: {source}")]
    Module {
        experiment: String,
        #[source]
        source: quasiloc::Error,
    },
    #[error("CSV {path} has no column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("CSV {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

pub type LabResult<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn module(experiment: &str, source: quasiloc::Error) -> Self {
        LabError::Module { experiment: experiment.to_string(), source }
    }

    /// 1 for numerical failures inside a module, 2 for anything the caller
    /// can fix by changing the invocation.
    pub fn exit_code(&self) -> i32 {
        use quasiloc::Error as E;
        match self {
            LabError::Module { source, .. } => match source {
                E::Precondition(_) | E::Domain(_) | E::Parse(_) | E::BudgetExceeded { .. } => 2,
                _ => 1,
            },
            LabError::Io { .. } => 1,
            _ => 2,
        }
    }
}
