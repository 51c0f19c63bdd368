//! The run manifest: which jobs reached a terminal status, and against
//! which script contents. Written atomically after every job.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::JobResult;
use crate::reporting::Verdict;
use crate::taskfolder::JobKey;
use crate::util::write_atomic;

pub const MANIFEST_FILE: &str = "manifest";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("no manifest in {0}")]
    Missing(String),
    #[error("corrupt manifest {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error("manifest {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// SHA-256 of the script the result was produced with.
    pub checksum: String,
    pub result: JobResult,
    #[serde(default)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub task: String,
    pub jobs: BTreeMap<JobKey, ManifestEntry>,
}

impl Manifest {
    pub fn new(task: impl Into<String>) -> Self {
        Manifest {
            version: FORMAT_VERSION,
            task: task.into(),
            jobs: BTreeMap::new(),
        }
    }

    pub fn load(results_dir: &Path) -> Result<Self, ManifestError> {
        let path = results_dir.join(MANIFEST_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(ManifestError::Missing(results_dir.display().to_string()))
            }
            Err(source) => {
                return Err(ManifestError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let corrupt = |message: String| ManifestError::Corrupt {
            path: path.display().to_string(),
            message,
        };
        let m: Manifest = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if m.version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported version {}", m.version)));
        }
        if let Some((k, _)) = m.jobs.iter().find(|(k, e)| **k != e.result.job || !e.result.status.is_terminal()) {
            return Err(corrupt(format!("inconsistent entry for {k}")));
        }
        Ok(m)
    }

    pub fn save(&self, results_dir: &Path) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        write_atomic(&results_dir.join(MANIFEST_FILE), text.as_bytes())
    }

    /// The recorded entry for `job`, if it is still valid for `checksum`.
    pub fn reusable(&self, job: &JobKey, checksum: &str) -> Option<&ManifestEntry> {
        self.jobs
            .get(job)
            .filter(|e| e.checksum == checksum && e.result.status.is_terminal())
    }
}
