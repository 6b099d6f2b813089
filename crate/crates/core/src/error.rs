use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported ADC bitwidth {0} (expected 1..=6)")]
    InvalidBitwidth(u32),

    #[error("invalid level mask: {0}")]
    InvalidMask(String),

    #[error("invalid thermometer code: {0}")]
    InvalidThermometer(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("accumulator overflow: value needs {needed} bits, accumulator has {width}")]
    AccumulatorOverflow { needed: u32, width: u32 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("fetch failed: {0}")]
    Fetch(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by user input (bad flags, config, or literals).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidBitwidth(_)
                | Error::InvalidMask(_)
                | Error::InvalidConfig(_)
                | Error::ShapeMismatch(_)
        )
    }
}
