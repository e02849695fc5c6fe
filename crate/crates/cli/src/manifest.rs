use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

/// Provenance record written to the output directory before a run starts and
/// rewritten when it ends.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config: serde_json::Value,
    /// SHA-256 of every input file, keyed by its path as given.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub wall_time: Option<f64>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        seed: u64,
        threads: Option<usize>,
        config: serde_json::Value,
    ) -> Self {
        Self {
            command: command.to_string(),
            version: version(),
            seed,
            threads,
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            status: RunStatus::Running,
            error: None,
            wall_time: None,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        self.inputs
            .insert(path.display().to_string(), hex::encode(digest));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}

pub fn version() -> String {
    match option_env!("CAGEWARP_GIT_REV") {
        Some(rev) => format!("{} ({rev})", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// A command report: `metrics` is reproducible for fixed inputs and seed,
/// `provenance` holds everything that is not (wall time, version).
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub metrics: serde_json::Value,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub wall_time: f64,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
