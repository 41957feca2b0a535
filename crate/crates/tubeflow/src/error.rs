use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    /// A core solver failed; `context` names the sweep point.
    #[error("{context}: {error}")]
    Solver { context: String, error: tubeflow_core::Error },
    #[error("{context}: cell Péclet number {peclet:.3} exceeds 2 (rerun with --allow-peclet to accept)")]
    Peclet { context: String, peclet: f64 },
    #[error("slope undefined: {0}")]
    SlopeUndefined(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

/// Attaches sweep-point context to core solver errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for tubeflow_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|error| HarnessError::Solver { context: what(), error })
    }
}
