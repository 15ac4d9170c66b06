//! Error type shared by every stage of the estimation pipeline.

use std::path::PathBuf;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar or index argument is outside its admissible range.
    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    /// Matrix or vector shapes do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A configuration value or combination of values is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The beam codebook Gram matrix `F F^H` cannot be inverted reliably.
    #[error("codebook is numerically singular (condition estimate {condition:.3e})")]
    SingularCodebook { condition: f64 },

    /// The selected sensing columns do not have full column rank.
    #[error("rank-deficient sensing columns for support {support:?}")]
    RankDeficient { support: Vec<usize> },

    /// Full least squares needs a full-column-rank sensing matrix.
    #[error("sensing matrix is low rank: numerical rank {rank} < {cols} columns")]
    LowRank { rank: usize, cols: usize },

    /// Every candidate block is already part of the support.
    #[error("all {0} candidate taps are already selected")]
    Exhausted(usize),

    /// The reference channel has zero energy, NMSE is undefined.
    #[error("reference channel has zero Frobenius norm")]
    ZeroReference,

    /// The stacked oracle problem would exceed its size guard.
    #[error("stacked problem has {entries} entries, above the guard of {limit}")]
    TooLarge { entries: usize, limit: usize },

    /// Malformed channel or configuration file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// A numeric entry is NaN or infinite.
    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier, used for the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::Dimension(_) => "dimension",
            Error::Config(_) => "config",
            Error::SingularCodebook { .. } => "singular_codebook",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::LowRank { .. } => "low_rank",
            Error::Exhausted(_) => "exhausted",
            Error::ZeroReference => "zero_reference",
            Error::TooLarge { .. } => "too_large",
            Error::Parse { .. } => "parse",
            Error::NonFinite(_) => "non_finite",
            Error::Io(_) => "io",
        }
    }
}
