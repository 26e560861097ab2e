//! Error types shared across the simulator.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scenario, plan, or mechanism parameter failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numeric operation received an argument outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The clearing DP exceeded its configured state budget.
    #[error(
        "clearing instance too large: {states} states exceed the cap of {cap}; \
         use a coarser resource quantum"
    )]
    InstanceTooLarge { states: usize, cap: usize },

    /// A guarded oracle was asked to solve an instance beyond its guard.
    #[error("oracle guard violated: {0}")]
    OracleGuard(String),

    /// An unknown mechanism name was requested.
    #[error("unknown mechanism `{name}`; valid names: {valid}")]
    UnknownMechanism { name: String, valid: String },

    /// I/O failure with the offending path attached.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Failed to parse a TOML config file.
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// CSV serialization or parsing failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
