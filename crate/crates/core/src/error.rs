use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or configuration value violates its invariant. `key` is the
    /// dotted scenario-file key (e.g. `launch.exit_speed_mps`).
    #[error("invalid value for `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("flap frequency {freq} Hz outside [0, {max}] Hz")]
    FlapFrequency { freq: f64, max: f64 },

    #[error("non-finite state at t = {time} s")]
    NonFinite { time: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
