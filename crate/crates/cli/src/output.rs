//! Run directories and manifests.

use std::path::{Path, PathBuf};

use idla_core::seed_ledger;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "IDLA_LAB_OUT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// One stream family used by the run, with its first key for spot checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub purpose: String,
    pub master_seed: u64,
    pub replicas: u64,
    /// `seed_ledger(master_seed, purpose, 0, 0)` in hex.
    pub first_key: String,
}

impl SeedRecord {
    pub fn new(master_seed: u64, purpose: &str, replicas: u64) -> Self {
        Self {
            purpose: purpose.to_string(),
            master_seed,
            replicas,
            first_key: format!("{:016x}", seed_ledger(master_seed, purpose, 0, 0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config_hash: String,
    pub graph_hashes: Vec<String>,
    /// Every file the run wrote except the manifest itself, in write order.
    pub outputs: Vec<OutputFile>,
    pub wall_clock_seconds: f64,
    pub seed_ledger: Vec<SeedRecord>,
    pub pass: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// The single writer of a run directory. Every output goes through
/// [`RunWriter::write`], which records its digest for the manifest.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl RunWriter {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        self.files.retain(|f| f.path != name);
        self.files.push(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn finish(self, manifest: &RunManifest) -> CliResult<PathBuf> {
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(manifest).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

/// Check every digest in `manifest` against the files in `dir`.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .outputs
        .iter()
        .filter_map(|f| match std::fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => None,
            Ok(_) => Some(format!("{}: digest mismatch", f.path)),
            Err(e) => Some(format!("{}: {e}", f.path)),
        })
        .collect()
}

pub fn read_manifest(dir: &Path) -> CliResult<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
