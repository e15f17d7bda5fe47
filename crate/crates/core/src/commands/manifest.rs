use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str, config: impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            artifacts: Vec::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputHash {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn add_artifact(&mut self, name: impl Into<String>) {
        self.artifacts.push(name.into());
    }

    /// Stamps the finish time and writes `manifest.json` into `out_dir`.
    pub fn finish(mut self, out_dir: &Path) -> Result<Self> {
        self.finished_unix_ms = now_ms();
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self)
    }

    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(&path, None, e.to_string()))
    }

    /// Recomputes every input hash; returns the inputs that changed.
    pub fn stale_inputs(&self) -> Result<Vec<PathBuf>> {
        let mut stale = Vec::new();
        for input in &self.inputs {
            if sha256_file(&input.path)? != input.sha256 {
                stale.push(input.path.clone());
            }
        }
        Ok(stale)
    }
}
