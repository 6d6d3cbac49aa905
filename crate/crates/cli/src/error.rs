use std::path::PathBuf;

use thiserror::Error;

/// CLI-level failures. Every variant renders as a single
/// `error: <kind>: <message>` line on stderr with a nonzero exit.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] pcmap_core::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Format(_) => "format",
            Self::Config(_) => "config",
            Self::Core(_) => "core",
        }
    }

    /// Machine-parsable one-line rendering.
    pub fn single_line(&self) -> String {
        let msg = self.to_string().replace('\n', "; ");
        format!("error: {}: {}", self.kind(), msg)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
