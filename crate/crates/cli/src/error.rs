use std::path::PathBuf;

use serde_json::json;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] faultadapt::Error),

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("snapshot {path} does not match the config: {reason}")]
    SnapshotMismatch { path: PathBuf, reason: String },

    #[error("{failed} of {total} seeds failed; see {manifest}")]
    SeedsFailed {
        failed: usize,
        total: usize,
        manifest: PathBuf,
    },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Csv { .. } => "csv",
            CliError::SnapshotMismatch { .. } => "snapshot_mismatch",
            CliError::SeedsFailed { .. } => "seeds_failed",
            CliError::Usage(_) => "usage",
        }
    }

    /// Document printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        if let CliError::Core(faultadapt::Error::Parse { key, .. }) = self {
            err["key"] = json!(key);
        }
        json!({ "error": err })
    }
}

pub(crate) fn io(path: impl Into<PathBuf>, e: std::io::Error) -> CliError {
    CliError::Core(faultadapt::Error::io(path, e))
}
