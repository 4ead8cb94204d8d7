//! The run report: a TOML document with metadata, mode-specific results,
//! the list of companion CSV files and the fully resolved configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const REPORT_FILE: &str = "report.toml";
/// Timestamp written in reproducible mode.
pub const REPRODUCIBLE_STAMP: &str = "reproducible";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub mode: String,
    pub seed: u64,
    /// SHA-256 of the embedded config's canonical TOML.
    pub config_hash: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub results: toml::Table,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

impl Report {
    pub fn new(
        config: ExperimentConfig,
        results: toml::Table,
        files: Vec<String>,
        reproducible: bool,
    ) -> Self {
        let timestamp = if reproducible {
            REPRODUCIBLE_STAMP.to_string()
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        };
        Report {
            metadata: Metadata {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                mode: config.mode.map_or("unset", |m| m.name()).to_string(),
                seed: config.seed,
                config_hash: config_hash(&config),
                timestamp,
            },
            results,
            files,
            config,
        }
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("report serializes to TOML")
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Data(format!("bad report: {e}")))
    }

    /// Whether the stored hash matches the embedded config.
    pub fn hash_matches(&self) -> bool {
        config_hash(&self.config) == self.metadata.config_hash
    }
}
