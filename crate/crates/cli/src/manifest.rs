use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "run.json";

/// Which fold a command read, how many participants it held and what for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldAccess {
    pub fold: String,
    pub participants: usize,
    pub purpose: String,
}

/// One per run, written next to the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Input path to content hash.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Output file names, relative to the output directory.
    pub artifacts: Vec<String>,
    pub fold_access: Vec<FoldAccess>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config_text: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: sha256_hex(config_text.as_bytes()),
            inputs: BTreeMap::new(),
            k_max: None,
            artifacts: Vec::new(),
            fold_access: Vec::new(),
            warnings: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    /// Replaces the hash of the effective configuration.
    pub fn set_config(&mut self, config_text: &str) {
        self.config_sha256 = sha256_hex(config_text.as_bytes());
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn fold(&mut self, fold: &str, participants: usize, purpose: &str) {
        self.fold_access.push(FoldAccess {
            fold: fold.to_string(),
            participants,
            purpose: purpose.to_string(),
        });
    }

    pub fn artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    /// True when the test fold was read for anything but evaluation.
    pub fn test_fold_leaked(&self) -> bool {
        self.fold_access
            .iter()
            .any(|a| a.fold == "test" && a.purpose != "evaluation")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
