use std::path::PathBuf;

/// Errors from file IO, configuration and the run harness.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] cgeig_core::Error),

    #[error("csv: {0}")]
    Csv(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Configuration problems map to exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
