use std::path::{Path, PathBuf};

/// Errors raised by file formats, drivers and the command line.
#[derive(Debug, thiserror::Error)]
pub enum HaanError {
    #[error(transparent)]
    Core(#[from] haan_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: not a readable PNG: {reason}")]
    Png { path: PathBuf, reason: String },
    #[error("checkpoint format error in section `{section}`: {reason}")]
    Format { section: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

pub type Result<T, E = HaanError> = std::result::Result<T, E>;

impl HaanError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn format(section: &str, reason: impl Into<String>) -> Self {
        Self::Format { section: section.to_string(), reason: reason.into() }
    }

    /// Whether the error stems from bad user input (configuration) rather
    /// than a failure while doing the work.
    pub fn is_usage(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Json { .. } | Self::Core(haan_core::Error::Config(_)))
    }
}
