// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{}: {msg}", path.display(), line.map_or("-".to_string(), |l| l.to_string()))]
    Parse {
        path: PathBuf,
        line: Option<u64>,
        msg: String,
    },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] kvnorm::Error),

    #[error("{0}")]
    Partial(String),

    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn config(key: &str, msg: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 parse, 3 config, 4 numeric, 5 partial, 1 other.
    pub fn exit_code(&self) -> i32 {
        use kvnorm::Error as E;
        match self {
            CliError::Parse { .. } => 2,
            CliError::Config { .. } => 3,
            CliError::Partial(_) => 5,
            CliError::Core(e) if e.is_numeric() => 4,
            CliError::Core(E::ModelFormat(_) | E::ModelVersionMismatch { .. } | E::InvalidSeries(_)) => 2,
            CliError::Core(
                E::InvalidParameter(_)
                | E::LevelTooLarge { .. }
                | E::InsufficientNormals { .. }
                | E::CorpusTooSmall { .. }
                | E::DimensionMismatch { .. },
            ) => 3,
            CliError::Core(_) | CliError::Io { .. } | CliError::Failed(_) => 1,
        }
    }
}
