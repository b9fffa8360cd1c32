use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A size exceeds a configured enumeration, oracle, or memory cap.
    #[error("{what} = {value} exceeds the configured cap {cap}")]
    Size {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    /// A computation needs a free cumulant beyond the listed orders.
    #[error("free cumulant of order {required} is needed but only orders up to {available} are given")]
    Truncation { required: usize, available: usize },

    /// Text input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_cap(what: &'static str, value: usize, cap: usize) -> Result<()> {
    if value > cap {
        Err(Error::Size { what, value, cap })
    } else {
        Ok(())
    }
}
