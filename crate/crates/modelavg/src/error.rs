use std::path::PathBuf;

use crate::config::ConfigError;
use crate::data::DataError;

/// Command failure, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid input: {0}")]
    Input(modelavg_core::Error),
    #[error("data error: {0}")]
    Data(DataError),
    #[error("numeric failure: {0}")]
    Numeric(modelavg_core::Error),
    #[error("{count} rounds violate the distance decrement (first at round {first_round})")]
    AuditViolation { count: usize, first_round: usize },
    #[error("audit unsupported: {0}")]
    UnsupportedAudit(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed artifact {}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::AuditViolation { .. } => 4,
            CliError::UnsupportedAudit(_) => 5,
            CliError::Io { .. } | CliError::Artifact { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<modelavg_core::Error> for CliError {
    fn from(e: modelavg_core::Error) -> Self {
        use modelavg_core::Error as E;
        match e {
            E::UnsupportedAudit => CliError::UnsupportedAudit(e.to_string()),
            E::DimensionMismatch { .. } | E::InvalidInput(_) | E::Domain { .. } | E::SizeCap { .. } => {
                CliError::Input(e)
            }
            _ => CliError::Numeric(e),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Core(c) => c.into(),
            other => CliError::Data(other),
        }
    }
}
