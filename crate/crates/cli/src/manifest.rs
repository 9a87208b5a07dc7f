use std::path::Path;

use chrono::{SecondsFormat, Utc};
use infograph::AnalysisConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and get the same bytes back.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub config: AnalysisConfig,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(config: &AnalysisConfig, seed: Option<u64>, started_at: String) -> Self {
        Self {
            tool: "infograph",
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            config: config.clone(),
            seed,
            inputs: Vec::new(),
            started_at,
            finished_at: String::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: sha256_hex(bytes) });
    }

    pub fn finish(mut self) -> Self {
        self.finished_at = now();
        self
    }
}
