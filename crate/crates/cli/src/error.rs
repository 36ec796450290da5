use ipkp_experiments::ExpError;
use ipkp_training::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration, arguments or missing inputs.
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Diverged(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

impl From<ExpError> for CliError {
    fn from(e: ExpError) -> Self {
        match e {
            ExpError::Config(m) => CliError::Config(m),
            ExpError::Train(t) => t.into(),
            ExpError::Proto(p) => CliError::Config(p.to_string()),
            ExpError::Nn(n) => n.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError::Diverged(e.to_string()),
            TrainError::Config(m) => CliError::Config(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}

macro_rules! failed_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Failed(e.to_string())
            }
        }
    )*};
}

failed_from!(ipkp_data::DataError, std::io::Error, png::EncodingError);

impl From<ipkp_nn::NnError> for CliError {
    fn from(e: ipkp_nn::NnError) -> Self {
        use ipkp_nn::NnError::*;
        match e {
            TruncationOutOfRange { .. } | ArchitectureMismatch { .. } => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ipkp_prototypes::ProtoError> for CliError {
    fn from(e: ipkp_prototypes::ProtoError) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
