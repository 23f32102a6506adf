//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: String, got: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inadmissible data: {0}")]
    InadmissibleData(String),

    #[error("solution blew up at t = {t}: |state| = {norm}")]
    BlowUp { t: f64, norm: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
