//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is outside its documented domain.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A heterogeneous-graph schema cannot resolve a requested relation.
    #[error("schema error: {0}")]
    Schema(String),

    /// The operation is valid but the input exceeds this code path's limits.
    #[error("capability exceeded: {0}")]
    Capability(String),

    /// A data file failed to load; carries file and line context.
    #[error("load error at {path}:{line}: {message}")]
    Load {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn load(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
