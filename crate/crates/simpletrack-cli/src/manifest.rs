//! Run manifests: a JSON snapshot of the configuration, inputs, outputs,
//! and seed written alongside every file-producing run, so any output can
//! be reproduced from its manifest alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simpletrack::TrackerConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: TrackerConfig,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str, config: TrackerConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
        }
    }

    pub fn with_inputs(mut self, inputs: &[&Path]) -> Self {
        self.inputs = inputs.iter().map(|p| p.display().to_string()).collect();
        self
    }

    pub fn with_outputs(mut self, outputs: &[&Path]) -> Self {
        self.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Write next to a single output file as `<output>.manifest.json`.
    pub fn write_beside(&self, output: &Path) -> std::io::Result<PathBuf> {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = output.with_file_name(name);
        self.write_to(&path)?;
        Ok(path)
    }

    /// Write as `manifest.json` inside an output directory.
    pub fn write_into_dir(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        self.write_to(&path)?;
        Ok(path)
    }

    fn write_to(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")
    }
}
