use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("constellation size {0} is not a power of two in 2..=64")]
    InvalidOrder(usize),

    #[error("label {label} is out of range for {m}-PSK")]
    LabelOutOfRange { label: usize, m: usize },

    #[error("({re}, {im}) is not a constellation point")]
    NotAConstellationPoint { re: f64, im: f64 },

    #[error("fade state ({re}, {im}) is not singular")]
    NotSingular { re: f64, im: f64 },

    #[error("colliding cells {0:?} and {1:?} share a row or column")]
    InconsistentPartition((usize, usize), (usize, usize)),

    #[error(
        "no exclusive-law completion with at most {max_labels} labels for fade state {fade_id}"
    )]
    CompletionFailed { fade_id: usize, max_labels: usize },

    #[error("grid of {0} cells exceeds the 10^8 cell limit")]
    GridTooLarge(u64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
