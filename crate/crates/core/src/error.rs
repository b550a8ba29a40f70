//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by networks, environments, training, and the run harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length for where it was used.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// Invalid configuration value caught before any work was done.
    #[error("configuration error: {0}")]
    Config(String),

    /// A mathematical precondition was violated (e.g. sigma <= 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// A NaN or infinity showed up where only finite values are allowed.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// An operation that needs data received none.
    #[error("empty input: {0}")]
    Empty(String),

    /// Checkpoint or config document could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),

    /// `step` was called on a finished episode without a `reset` in between.
    #[error("episode is over; call reset before stepping again")]
    EpisodeOver,

    #[error("unknown environment '{0}' (expected pendulum, mountaincar, or pointtrap)")]
    UnknownEnv(String),

    #[error("unknown algorithm '{0}' (expected ppo, icm-ppo, or iem-ppo)")]
    UnknownAlgo(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            actual,
        }
    }
}
