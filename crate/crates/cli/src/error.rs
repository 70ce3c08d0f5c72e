use std::path::PathBuf;

use fairbbr_core::experiment::ExperimentError;
use fairbbr_core::fairness::FairnessError;
use fairbbr_core::measurement::MeasurementError;
use fairbbr_core::ml::MlError;
use fairbbr_core::scenario::ConfigError;
use fairbbr_core::simcore::SimError;
use thiserror::Error;

/// Command failure, classified by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for I/O, 2 for configuration or input validation, 3 for data that
    /// cannot support the requested analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Internal(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Invalid(format!("invalid config: {e}"))
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(msg) => CliError::Invalid(format!("invalid config: {msg}")),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<FairnessError> for CliError {
    fn from(e: FairnessError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(e) => e.into(),
            ExperimentError::Sim(e) => e.into(),
            ExperimentError::Fairness(e) => e.into(),
            ExperimentError::MissingPredictor => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<MlError> for CliError {
    fn from(e: MlError) -> Self {
        match e {
            MlError::SingleClassData => CliError::Degenerate("single class".into()),
            MlError::EmptyInput | MlError::TooFewRows(_) | MlError::InvalidK { .. } => {
                CliError::Degenerate(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

/// CSV errors carry the file they came from.
pub(crate) fn csv_error(path: &std::path::Path, e: MeasurementError) -> CliError {
    match e {
        MeasurementError::Io(source) => CliError::io(path, source),
        other => CliError::Invalid(format!("{}: {other}", path.display())),
    }
}
