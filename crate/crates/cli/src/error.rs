use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, flags or input file contents.
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The computation itself failed (fit did not converge, undefined QBER, ...).
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<dps_qkd::Error> for CliError {
    fn from(e: dps_qkd::Error) -> Self {
        use dps_qkd::Error as E;
        match e {
            E::Domain { .. } | E::InvalidParameter { .. } | E::EmptySession | E::Protocol(_) => {
                CliError::Config(e.to_string())
            }
            E::FitFailure {
                residual_norm: Some(norm),
                ..
            } => CliError::Numeric(format!("{e} (residual norm {norm:.6e})")),
            E::DegenerateWaveform(_) | E::FitFailure { .. } | E::UndefinedQber => CliError::Numeric(e.to_string()),
        }
    }
}
