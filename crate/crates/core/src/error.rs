use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid `{param}`: {reason}")]
    Domain { param: &'static str, reason: String },

    /// An enumeration would exceed the configured work limit.
    #[error("work limit exceeded: {requested} configurations requested, limit is {limit}")]
    WorkLimit { requested: u128, limit: u128 },

    /// Exact integer arithmetic overflowed.
    #[error("integer overflow computing {0}")]
    Overflow(&'static str),

    /// Malformed input text.
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(param: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        param,
        reason: reason.into(),
    }
}

/// Fails with a domain error naming `param` unless `cond` holds.
pub(crate) fn ensure(
    cond: bool,
    param: &'static str,
    reason: impl FnOnce() -> String,
) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(domain(param, reason()))
    }
}
