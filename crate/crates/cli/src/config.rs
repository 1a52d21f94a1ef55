//! Run configuration: a flat TOML table holding every training setting plus
//! the dataset path and subject filter.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use svma::training::TrainConfig;

use crate::UsageError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    /// Keypoint file to train on; relative paths resolve against the config
    /// file's directory.
    pub train_data: Option<PathBuf>,
    #[serde(default)]
    pub subjects: Vec<String>,
    #[serde(flatten)]
    pub train: TrainConfig,
}

/// Every setting at its default value, with a placeholder dataset path so
/// that key shows up too.
fn defaults() -> toml::Table {
    let probe = RunConfig {
        train_data: Some(PathBuf::from(".")),
        ..RunConfig::default()
    };
    match toml::Value::try_from(probe) {
        Ok(toml::Value::Table(t)) => t,
        _ => toml::Table::new(),
    }
}

fn known_keys() -> BTreeSet<String> {
    defaults().keys().cloned().collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| UsageError(format!("config {} is not valid TOML: {e}", path.display())))?;
        let mut merged = defaults();
        merged.remove("train_data");
        if let Some(bad) = table.keys().find(|k| !known_keys().contains(*k)) {
            return Err(UsageError(format!("config {}: unknown field `{bad}`", path.display())).into());
        }
        merged.extend(table);
        let mut cfg: RunConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        if let Some(p) = &cfg.train_data {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.train_data = Some(base.join(p));
            }
        }
        Ok(cfg)
    }
}
