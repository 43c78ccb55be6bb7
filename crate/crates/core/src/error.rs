use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain (negative time, zero resolution, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration value violates an invariant; `key` is the config key name.
    #[error("invalid value for `{key}`: {reason}")]
    Invariant { key: String, reason: String },

    /// A text input could not be parsed; `line` is 1-based.
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// Sweep-point failure, annotated with the offending gate delay.
    #[error("at gate delay {delay_ns} ns: {source}")]
    AtDelay {
        delay_ns: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The afterpulse ratio has a zero denominator.
    #[error("afterpulse estimate undefined: reference count is zero")]
    UndefinedEstimate,

    /// All points of a series collapse onto one location, so no direction exists.
    #[error("degenerate geometry: {0}")]
    Rank(String),

    #[error("fitted slope {slope} is not decaying")]
    NonDecaying { slope: f64 },

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invariant(key: &str, reason: impl Into<String>) -> Self {
        Error::Invariant {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
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
