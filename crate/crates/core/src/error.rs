use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions n={n}, p={p}: {reason}")]
    InvalidDimensions { n: usize, p: usize, reason: String },

    #[error("invalid parameter {name}={value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Column index is 1-based.
    #[error("column {column} is degenerate (zero centered norm)")]
    DegenerateColumn { column: usize },

    #[error("mask gap m={m} out of range for p={p} (need 1 <= m <= p-1)")]
    MaskOutOfRange { m: usize, p: usize },

    #[error("skewness undefined for {0}")]
    UndefinedMoment(String),

    #[error("malformed correlation matrix: {0}")]
    MalformedCorrelation(String),

    #[error("regime (n={regime_n}, p={regime_p}) does not match data (n={n}, p={p})")]
    RegimeMismatch {
        regime_n: usize,
        regime_p: usize,
        n: usize,
        p: usize,
    },

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    /// True for errors caused by the numbers themselves (degenerate columns,
    /// undefined moments) rather than by malformed input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::DegenerateColumn { .. } | Error::UndefinedMoment(_) => true,
            Error::Replication { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
