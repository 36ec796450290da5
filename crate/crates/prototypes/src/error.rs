use ipkp_data::DataError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtoError {
    #[error("line {line}{}: {reason}", class.map(|c| format!(" (class {c})")).unwrap_or_default())]
    Parse {
        line: usize,
        class: Option<usize>,
        reason: String,
    },
    #[error("prototype for class {class} has no strokes")]
    EmptyStrokes { class: usize },
    #[error("invalid prototype: {0}")]
    Invalid(String),
    #[error("invalid augmentation config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, ProtoError>;
