use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    /// A sampler produced a non-finite gradient, position, or energy.
    #[error("sampler diverged at inner step {inner_step}{}", round.map(|r| format!(" of round {r}")).unwrap_or_default())]
    Divergence {
        theta: Vec<f64>,
        inner_step: usize,
        round: Option<usize>,
    },

    #[error("run aborted (policy {policy}, seed {seed}, round {round}): {source}")]
    RunAborted {
        policy: String,
        seed: u64,
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("end of stream: horizon of {horizon} rounds exhausted")]
    EndOfStream { horizon: usize },

    #[error("ingestion error at line {line}: {message}")]
    Ingestion { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("internal state error: {0}")]
    Internal(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(actual: usize, expected: usize) -> Result<()> {
    if actual == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

pub(crate) fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite values")))
    }
}
