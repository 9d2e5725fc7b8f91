//! Experiment manifest: the config snapshot plus content hashes of every
//! artifact, written last so a complete manifest implies complete outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub experiment_id: String,
    pub tool_version: String,
    /// `complete` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Hash of the full config snapshot.
    pub config_hash: String,
    /// Hash of the parameters that determine the level-1 archive.
    pub level1_config_hash: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub summary: BTreeMap<String, String>,
    #[serde(default)]
    pub outputs: BTreeMap<String, OutputEntry>,
    pub config: ExperimentConfig,
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Self = toml::from_str(&text)?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Hash of the whole config, via its canonical TOML form. Every key that
/// can change an output is part of the config, so any change moves the hash.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    Ok(sha256_hex(cfg.to_toml_string()?.as_bytes()))
}

/// Hash of only the simulation and detection settings, used to decide
/// whether an existing level-1 archive can be reused.
pub fn level1_config_hash(cfg: &ExperimentConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Level1Inputs<'a> {
        observation: &'a crate::config::ObservationConfig,
        sources: &'a [crate::config::SourceSpec],
        rfi: &'a [crate::config::RfiSpec],
        detection: &'a crate::config::DetectionParams,
    }
    let text = toml::to_string(&Level1Inputs {
        observation: &cfg.observation,
        sources: &cfg.sources,
        rfi: &cfg.rfi,
        detection: &cfg.detection,
    })?;
    Ok(sha256_hex(text.as_bytes()))
}
