use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::inputs::{inputs_hash, InputFile};

/// Everything needed to reproduce a run. Its hash is embedded in every
/// output file of the run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<InputFile>,
    pub inputs_hash: String,
    pub seed: u64,
    pub count: u64,
    pub settings: serde_json::Value,
    pub outputs: Vec<String>,
    pub hash: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        inputs: Vec<InputFile>,
        seed: u64,
        count: u64,
        settings: serde_json::Value,
        outputs: &[PathBuf],
    ) -> Self {
        let mut m = Self {
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            inputs_hash: inputs_hash(&inputs),
            inputs,
            seed,
            count,
            settings,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            hash: String::new(),
        };
        let body = serde_json::to_vec(&m).expect("manifest serializes");
        m.hash = hex::encode(Sha256::digest(&body));
        m
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)? + "\n")
    }
}
