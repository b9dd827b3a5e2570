use std::path::PathBuf;

/// Errors produced anywhere in the feature-extraction and recognition pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read image {path}: {reason}")]
    UnreadableImage { path: PathBuf, reason: String },

    #[error("mask {0} has no foreground pixels")]
    EmptyMask(String),

    #[error("expected a square mask, got {width}x{height}")]
    NonSquareInput { width: usize, height: usize },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("dataset at {0} contains no images")]
    EmptyDataset(PathBuf),

    #[error("class `{0}` has no images")]
    ClassWithNoImages(String),

    #[error("degenerate range on {axis} axis: [{lo}, {hi}]")]
    DegenerateRange { axis: &'static str, lo: f64, hi: f64 },

    #[error("expected {expected} diagrams (one per direction), got {actual}")]
    WrongDirectionCount { expected: usize, actual: usize },

    #[error("persistence images for direction {0} are identically zero")]
    AllZeroStack(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("predictions ({predictions}) and truths ({truths}) differ in length")]
    LengthMismatch { predictions: usize, truths: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {what} file: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
