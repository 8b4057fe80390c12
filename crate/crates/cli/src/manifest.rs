use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::artifacts::write_json;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub seed: u64,
    pub status: SeedStatus,
    /// Artifact name to path relative to the run directory.
    #[serde(default)]
    pub artifacts: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment_id: String,
    /// `train` or `adapt`.
    pub command: String,
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<u8>,
    pub config_digest: String,
    pub seeds: Vec<SeedEntry>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        crate::artifacts::read_json(path)
    }

    pub fn done_seeds(&self) -> Vec<u64> {
        self.seeds.iter().filter(|e| e.status == SeedStatus::Done).map(|e| e.seed).collect()
    }
}

/// Manifest shared by concurrent seed jobs; every change is written through.
pub struct ManifestWriter {
    path: PathBuf,
    inner: Mutex<RunManifest>,
}

impl ManifestWriter {
    pub fn create(path: PathBuf, manifest: RunManifest) -> Result<Self> {
        write_json(&path, &manifest)?;
        Ok(Self {
            path,
            inner: Mutex::new(manifest),
        })
    }

    pub fn update(&self, seed: u64, f: impl FnOnce(&mut SeedEntry)) -> Result<()> {
        let mut m = self.inner.lock().expect("manifest lock");
        if let Some(e) = m.seeds.iter_mut().find(|e| e.seed == seed) {
            f(e);
        }
        write_json(&self.path, &*m)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> RunManifest {
        self.inner.lock().expect("manifest lock").clone()
    }
}
