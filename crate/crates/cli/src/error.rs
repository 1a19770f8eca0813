//! Exit codes and their mapping from library errors. Every failure prints
//! one line `error[E<code>]: <message>` on stderr.

use std::fmt;

use rlcheck::benchmarks::BenchmarkError;
use rlcheck::checker::CheckError;
use rlcheck::lang::LangError;
use rlcheck::model::ModelError;
use rlcheck::policy::PolicyError;
use rlcheck::runs::TrackerError;
use rlcheck::transforms::TransformError;

pub const GENERIC: u8 = 1;
pub const PARSE: u8 = 2;
pub const TRAINING: u8 = 3;
pub const IO: u8 = 4;
pub const LIMIT: u8 = 5;
pub const INVALID_ACTION: u8 = 6;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new(PARSE, message)
    }

    /// Reclassifies model-semantics failures as training errors.
    pub fn in_training(self) -> Self {
        if self.code == GENERIC {
            CliError { code: TRAINING, ..self }
        } else {
            self
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.replace('\n', " ");
        write!(f, "error[E{}]: {}", self.code, one_line)
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<LangError> for CliError {
    fn from(e: LangError) -> Self {
        CliError::new(PARSE, e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = match &e {
            ModelError::LimitExceeded { .. } => LIMIT,
            ModelError::InvalidAction { .. } | ModelError::EmptyPermissive { .. } => INVALID_ACTION,
            ModelError::Io(_) | ModelError::Corrupt(_) => IO,
            _ => GENERIC,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<CheckError> for CliError {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Model(m) => m.into(),
            CheckError::NonConvergence { .. } => CliError::new(GENERIC, e.to_string()),
            other => CliError::new(PARSE, other.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Model(m) => CliError::from(m).in_training(),
            PolicyError::Io(_) => CliError::new(IO, e.to_string()),
            PolicyError::Config(_) | PolicyError::NonFinite { .. } => CliError::new(TRAINING, e.to_string()),
            other => CliError::new(PARSE, other.to_string()),
        }
    }
}

impl From<TrackerError> for CliError {
    fn from(e: TrackerError) -> Self {
        let code = match &e {
            TrackerError::NotFound(_) | TrackerError::Ambiguous(_) => PARSE,
            TrackerError::Io(_) | TrackerError::Corrupt { .. } => IO,
            _ => GENERIC,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        CliError::new(PARSE, e.to_string())
    }
}

impl From<BenchmarkError> for CliError {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::Model(m) => m.into(),
            BenchmarkError::Validation { .. } => CliError::new(GENERIC, e.to_string()),
            other => CliError::new(PARSE, other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(IO, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new(PARSE, format!("config: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::new(IO, e.to_string())
    }
}
