use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation or configuration.
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mfcomm::Error),

    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io { .. } => 1,
            Self::Core(e) if e.is_usage() => 1,
            Self::Core(_) => 2,
        }
    }

    /// Machine-readable record for numerical failures.
    pub fn record(&self) -> serde_json::Value {
        match self {
            Self::Core(mfcomm::Error::Collision { t, i, j, floor }) => json!({
                "error": "collision",
                "t": t,
                "pair": [i, j],
                "floor": floor,
                "message": self.to_string(),
            }),
            Self::Core(e) => json!({ "error": kind(e), "message": self.to_string() }),
            Self::Config(_) => json!({ "error": "config", "message": self.to_string() }),
            Self::Io { .. } => json!({ "error": "io", "message": self.to_string() }),
        }
    }
}

fn kind(e: &mfcomm::Error) -> &'static str {
    use mfcomm::Error::*;
    match e {
        Domain(_) => "domain",
        Usage(_) => "usage",
        Precondition(_) => "precondition",
        Data(_) => "data",
        Resolution(_) => "resolution",
        Degenerate(_) => "degenerate",
        Collision { .. } => "collision",
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
