use std::path::PathBuf;

use sav_bottleneck::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid parameters: {0}")]
    Params(#[source] ModelError),

    #[error("numerical failure: {0}")]
    Model(#[from] ModelError),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    /// 1 for anything the user can fix in the config or environment,
    /// 2 for numerical failures. Failed self-checks also exit 2.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Params(_) | CliError::Io { .. } | CliError::Csv { .. } => 1,
            CliError::Model(_) => 2,
        }
    }
}
