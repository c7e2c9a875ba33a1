use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: u64,
        msg: String,
    },

    #[error("sequence {seq_id}, channel {channel}: intervals [{a_start}, {a_end}) and [{b_start}, {b_end}) overlap")]
    Overlap {
        seq_id: String,
        channel: usize,
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },

    #[error("sequence {seq_id} has interval rows but no label")]
    UnlabelledSequence { seq_id: String },

    #[error("sequence {seq_id} appears more than once in the labels file")]
    DuplicateLabel { seq_id: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("model file is not usable: {0}")]
    ModelFormat(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
