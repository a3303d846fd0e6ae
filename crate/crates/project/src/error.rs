use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{path}: `{key}` must be one of {allowed}, found `{value}`")]
    InvalidEnum { path: PathBuf, key: String, value: String, allowed: String },
    #[error("cannot fetch `{url}`: {message}")]
    Fetch { url: String, message: String },
    #[error("`{url}` {version} is not in the cache and `--offline` forbids fetching")]
    NotCached { url: String, version: String },
    #[error("dependency cycle: {}", .chain.join(" -> "))]
    Cycle { chain: Vec<String> },
    #[error("{message}")]
    Conflict { message: String },
    #[error("{path}: {message}")]
    Lockfile { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ProjectError {
    pub fn code(&self) -> &'static str {
        match self {
            ProjectError::Manifest { .. } | ProjectError::Lockfile { .. } => "E0401",
            ProjectError::InvalidEnum { .. } => "E0402",
            ProjectError::Fetch { .. } => "E0403",
            ProjectError::NotCached { .. } => "E0404",
            ProjectError::Cycle { .. } => "E0405",
            ProjectError::Conflict { .. } => "E0406",
            ProjectError::Io { .. } => "EIO01",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ProjectError::Io { path: path.into(), source }
    }
}

/// Non-fatal manifest finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub code: &'static str,
    pub message: String,
}
