//! Run manifests: every command writes one beside its outputs, tying the
//! artifacts to the resolved config hash, seed, and input/output digests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use caster_core::{Error, Result};

use crate::config::{AppConfig, DigestMap};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub fn digest_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes =
        std::fs::read(path).map_err(|err| Error::io(path.display().to_string(), err))?;
    Ok(sha256_hex(&bytes))
}

/// Record of one command invocation. Two runs of the same command with the
/// same inputs differ only in `duration_ms`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: DigestMap,
    pub outputs: DigestMap,
    pub duration_ms: u64,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &AppConfig) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed(),
            config_hash: cfg.config_hash(),
            inputs: DigestMap::new(),
            outputs: DigestMap::new(),
            duration_ms: 0,
        }
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.inputs.insert(path.display().to_string(), digest_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.outputs.insert(path.display().to_string(), digest_file(path)?);
        Ok(())
    }

    /// Stamps the duration and writes `<command>.manifest.json` into `dir`.
    pub fn write(mut self, dir: impl AsRef<Path>, started: Instant) -> Result<PathBuf> {
        self.duration_ms = started.elapsed().as_millis() as u64;
        let dir = dir.as_ref();
        let dir = if dir.as_os_str().is_empty() { Path::new(".") } else { dir };
        std::fs::create_dir_all(dir).map_err(|err| Error::io(dir.display().to_string(), err))?;
        let path = dir.join(format!("{}.manifest.json", self.command));
        let mut text = serde_json::to_string_pretty(&self)
            .map_err(|err| Error::Format(format!("manifest serialize: {err}")))?;
        text.push('\n');
        std::fs::write(&path, text)
            .map_err(|err| Error::io(path.display().to_string(), err))?;
        Ok(path)
    }
}

/// Directory a manifest should land in for a given primary output file.
pub fn manifest_dir(primary_output: &Path) -> PathBuf {
    match primary_output.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
