use meld_core::Error as CoreError;
use thiserror::Error;

/// Command failures, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("evaluation failed: {0}")]
    Evaluation(CoreError),
    #[error("constant estimation failed: {0}")]
    Estimation(CoreError),
    #[error("simulation stopped at t = {t}: {error}")]
    Simulation { t: f64, error: CoreError },
    #[error("mismatched fixtures: {0}")]
    Mismatch(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file {path}: {msg}")]
    Format { path: String, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Evaluation(_) => 3,
            CliError::Estimation(_) => 4,
            CliError::Simulation { .. } => 5,
            CliError::Mismatch(_) => 6,
            CliError::Io(_) | CliError::Format { .. } => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::EstimationFailure { .. } => CliError::Estimation(e),
            CoreError::SingularInteraction { .. } | CoreError::NonFiniteState { .. } => {
                CliError::Simulation { t: f64::NAN, error: e }
            }
            e => CliError::Evaluation(e),
        }
    }
}

impl From<meld_core::sim::SimFailure> for CliError {
    fn from(f: meld_core::sim::SimFailure) -> Self {
        match f.error {
            CoreError::SingularInteraction { .. } | CoreError::NonFiniteState { .. } => {
                CliError::Simulation { t: f.t, error: f.error }
            }
            e => CliError::from(e),
        }
    }
}
