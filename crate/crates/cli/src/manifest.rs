use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one invocation. Timestamps live only here, so every other
/// output file is reproducible byte for byte.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub tool_version: String,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    start: Instant,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl ManifestBuilder {
    pub fn new(command: &str, argv: &[String], config: serde_json::Value) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_owned(),
                argv: argv.to_vec(),
                config,
                input_hashes: BTreeMap::new(),
                outputs: Vec::new(),
                started_unix_seconds: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
                wall_clock_seconds: 0.0,
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            },
            start: Instant::now(),
        }
    }

    pub fn input_file(&mut self, path: &Path) -> std::io::Result<()> {
        let hash = sha256_file(path)?;
        self.manifest
            .input_hashes
            .insert(path.display().to_string(), hash);
        Ok(())
    }

    /// Hashes the dataset files that exist in `dir`.
    pub fn input_dataset(&mut self, dir: &Path) -> std::io::Result<()> {
        for name in ["edges.tsv", "features.csv", "labels.csv", "masks.csv"] {
            let p = dir.join(name);
            if p.exists() {
                self.input_file(&p)?;
            }
        }
        Ok(())
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.manifest.outputs.push(path.into().display().to_string());
    }

    pub fn write(mut self, dir: &Path) -> std::io::Result<PathBuf> {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        std::fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
