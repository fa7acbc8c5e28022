use thiserror::Error;

/// Failure modes shared by every module.
///
/// The variants map onto the CLI exit codes: `Usage` is a caller mistake
/// (exit 1), everything else is a numerical or precondition failure (exit 2).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("collision at t = {t}: particles {i} and {j} closer than {floor}")]
    Collision { t: f64, i: usize, j: usize, floor: f64 },
}

impl Error {
    /// True for errors caused by how the caller invoked an operation.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
