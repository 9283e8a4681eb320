use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Evaluation outside the domain of a function (e.g. negative time for a kernel).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Out-of-order or missing history, or other inconsistent simulation state.
    #[error("state error: {0}")]
    State(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A theorem-level precondition does not hold (e.g. F'(0) <= 0).
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("fit precondition failed: {0}")]
    Fit(String),
}

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
