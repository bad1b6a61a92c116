//! `manifest.json` written into every output directory.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub created_unix: u64,
    pub version: String,
    pub config: RunConfig,
    /// SHA-256 of every file in the directory, by relative path.
    pub artifacts: BTreeMap<String, String>,
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else if path != root.join(MANIFEST_NAME) {
            let rel = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .to_string_lossy()
                .replace('\\', "/");
            out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&path)?)));
        }
    }
    Ok(())
}

pub fn write_manifest(dir: &Path, command: &str, config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut artifacts = BTreeMap::new();
    collect(dir, dir, &mut artifacts)?;
    let manifest = RunManifest {
        command: command.to_string(),
        config_hash: config.hash(),
        seed: config.seed_or_default(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        artifacts,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST_NAME), text)?;
    Ok(manifest)
}
