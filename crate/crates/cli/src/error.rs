use std::path::PathBuf;

use thiserror::Error;

/// Failure of a subcommand. Each variant maps to a fixed process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input data, or an invalid generator spec.
    #[error("{0}")]
    Input(String),
    /// Invalid configuration: bad config file, out-of-range parameters.
    #[error("{0}")]
    Config(String),
    /// Assignment doc_ids without a gold label.
    #[error("{count} assigned document(s) have no gold label, first `{first}`")]
    Unmatched { first: String, count: usize },
    /// Clustering artifacts needed by `topwords` are absent or unreadable.
    #[error("missing model artifact {path}: {reason}")]
    MissingArtifact { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Unmatched { .. } => 4,
            CliError::MissingArtifact { .. } => 5,
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
