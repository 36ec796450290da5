use thiserror::Error;

pub type Result<T, E = NnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid tensor: shape {shape:?} holds {expected} values but {found} were given")]
    InvalidTensor {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch at layer {layer}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        layer: usize,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },

    #[error("label {label} at batch index {index} is out of range for {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },

    #[error("missing activation for layer {layer}")]
    MissingActivation { layer: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("truncation index {k} is outside 0..={layers}")]
    TruncationOutOfRange { k: usize, layers: usize },

    #[error("architecture mismatch: expected `{expected}`, found `{found}`")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("malformed architecture descriptor `{0}`")]
    BadDescriptor(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
