use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimsMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("input values outside [0, 1]; normalize before processing")]
    NotNormalized,

    #[error("step sizes violate tau * sigma * L^2 <= 1 (tau={tau}, sigma={sigma}, l={l})")]
    InvalidStepSizes { tau: f64, sigma: f64, l: f64 },

    #[error("unsupported image format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("I/O error for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("TIFF error for {path}: {source}")]
    Tiff {
        path: PathBuf,
        #[source]
        source: tiff::TiffError,
    },

    #[error("PNG error for {path}: {reason}")]
    Png { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
