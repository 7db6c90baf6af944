use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the prompt pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("failed to decode image: {0}")]
    Decode(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("image has zero width or height")]
    EmptyImage,

    #[error("gaussian sigma must be non-negative, got {0}")]
    NegativeSigma(f64),

    #[error("requested {requested} unique points but the image only has {available} pixels")]
    BudgetExceedsPixels { requested: usize, available: usize },

    #[error("prompt schema error: {0}")]
    Schema(String),

    #[error("could not place {count} ovals after {attempts} attempts; configuration is too dense")]
    PlacementFailure { count: usize, attempts: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
