//! Crate-wide error type and the exit codes the CLI maps it to.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration file failed to load or validate. The message names
    /// the offending field.
    #[error("configuration error: {0}")]
    Config(String),

    /// Filesystem trouble while reading or writing run artifacts.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A checkpoint failed to load, parse, or match the scenario dimensions.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// Configs passed to `compare` do not share a scenario.
    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    /// A metrics CSV could not be parsed. Names the line number.
    #[error("csv parse error at {path}:{line}: {message}")]
    CsvParse {
        path: String,
        line: usize,
        message: String,
    },

    /// An API contract was violated (shape mismatch, step after done, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric precondition was violated (negative SINR, rho <= 0, ...).
    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    /// Distinct documented exit code per error class (success is 0).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 3,
            Error::Checkpoint(_) => 4,
            Error::Divergence(_) => 5,
            Error::ScenarioMismatch(_) => 6,
            Error::CsvParse { .. } => 7,
            Error::Contract(_) => 8,
            Error::Domain(_) => 9,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
