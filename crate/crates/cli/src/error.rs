use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Core(#[from] idla_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use idla_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Unsupported(_) => EXIT_INVALID,
            CliError::Write { .. } => EXIT_RESOURCE,
            CliError::Core(e) => match e {
                E::Input(_) | E::Parse { .. } | E::Range(_) | E::Construction(_) => EXIT_INVALID,
                E::ConditioningFailed { .. }
                | E::Numerical { .. }
                | E::Resource(_)
                | E::AggregationStalled { .. }
                | E::Io(_) => EXIT_RESOURCE,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
