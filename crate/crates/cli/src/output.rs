//! Atomic output files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub software_version: String,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub output_dir: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub settings: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Collects outputs under one directory; every file is written to a
/// temporary name first and renamed into place.
pub struct OutputDir {
    root: PathBuf,
    started: u64,
    outputs: Vec<OutputEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            started: unix_now(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(name), bytes)?;
        self.outputs.push(OutputEntry {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        log::info!("wrote {}", self.root.join(name).display());
        Ok(())
    }

    /// Renders with `f` into memory, then writes atomically.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> smbp::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).with_context(|| format!("while rendering {name}"))?;
        self.write(name, &buf)
    }

    pub fn finish(
        self,
        subcommand: &str,
        config_path: Option<&Path>,
        seed: Option<u64>,
        settings: serde_json::Value,
    ) -> Result<()> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            seed,
            rng: seed.map(|_| smbp::processes::RNG_ALGORITHM.to_string()),
            output_dir: self.root.display().to_string(),
            started_unix: self.started,
            finished_unix: unix_now(),
            settings,
            outputs: self.outputs,
        };
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        write_atomic(&self.root.join(MANIFEST_FILE), &json)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("cannot move output into {}", path.display()))
}
