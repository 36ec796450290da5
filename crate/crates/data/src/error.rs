use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: bad magic number 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated, expected {expected} bytes but found {found}")]
    Truncated { path: PathBuf, expected: usize, found: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("class {class} is empty")]
    EmptyClass { class: usize },
    #[error("subset too small: class {class} would receive no items (fraction {fraction})")]
    SubsetTooSmall { class: usize, fraction: f64 },
    #[error("class {class} has {available} items, {requested} requested")]
    NotEnoughItems { class: usize, available: usize, requested: usize },
    #[error("invalid fraction {0}: must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("dataset cache: {0}")]
    Cache(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}
