//! Output directory handling and the run manifest written next to the data.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    /// Options after merging flags, config file and defaults.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub wall_time_seconds: f64,
    /// File name to hex SHA-256.
    pub outputs: BTreeMap<String, String>,
}

/// Collects output files under one directory and records their digests.
pub struct OutputDir {
    dir: PathBuf,
    digests: BTreeMap<String, String>,
    started: Instant,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::Config(format!(
                "cannot create output directory {}: {e}",
                dir.display()
            ))
        })?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            digests: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.digests
            .insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn finish<C: Serialize>(
        self,
        subcommand: &'static str,
        config: &C,
        seed: Option<u64>,
    ) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            tool: "ptlg",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config: serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
            seed,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: self.digests,
        };
        let mut text =
            serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
        text.push(b'\n');
        fs::write(self.dir.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}
