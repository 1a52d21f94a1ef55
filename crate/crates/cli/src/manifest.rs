//! Run manifests and dataset fingerprints.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use svma::training::TrainConfig;

use crate::UsageError;

pub const FORMAT: &str = "svma-run";
pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub log: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub code_version: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub train_data: DatasetRecord,
    pub subjects: Vec<String>,
    pub outputs: Outputs,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn code_version() -> String {
    format!("svma {}", env!("CARGO_PKG_VERSION"))
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> anyhow::Result<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("manifest {}: {e}", path.display())))?;
        if m.format != FORMAT {
            return Err(UsageError(format!("{} is not a run manifest", path.display())).into());
        }
        Ok(m)
    }
}
