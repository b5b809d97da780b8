//! Run manifests: every command records its resolved configuration, input
//! hashes, and output hashes, so a run can be replayed and verified
//! byte-for-byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one command execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Subcommand name.
    pub command: String,
    /// Fully resolved command specification (seeds, paths, config values).
    pub spec: serde_json::Value,
    /// Input path → sha256 (directories get a combined content hash).
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the run directory → sha256.
    pub outputs: BTreeMap<String, String>,
}

/// sha256 of one file, hex-encoded.
pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn walk_sorted(dir: &Path, base: &Path, files: &mut Vec<String>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(CliError::io(dir))?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            walk_sorted(&path, base, files)?;
        } else {
            let rel = path
                .strip_prefix(base)
                .expect("walked path under base")
                .to_string_lossy()
                .replace('\\', "/");
            files.push(rel);
        }
    }
    Ok(())
}

/// Combined hash of a directory: sha256 over the sorted relative names and
/// per-file content hashes.
pub fn hash_dir(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    walk_sorted(dir, dir, &mut files)?;
    let mut hasher = Sha256::new();
    for rel in files {
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update(hash_file(&dir.join(&rel))?.as_bytes());
        hasher.update([0u8]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Hash a path that may be a file or a directory.
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        hash_dir(path)
    } else {
        hash_file(path)
    }
}

/// Hash every file under `out_dir` (relative names), excluding the manifest
/// itself.
pub fn hash_outputs(out_dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    walk_sorted(out_dir, out_dir, &mut files)?;
    let mut map = BTreeMap::new();
    for rel in files {
        if rel == MANIFEST_FILE {
            continue;
        }
        map.insert(rel.clone(), hash_file(&out_dir.join(&rel))?);
    }
    Ok(map)
}

/// Write the manifest into its run directory.
pub fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).map_err(CliError::json(&path))?;
    fs::write(&path, json + "\n").map_err(CliError::io(&path))
}

/// Read a manifest file.
pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let raw = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&raw).map_err(CliError::json(path))
}

/// Build and write the manifest for a finished run, hashing all outputs.
pub fn finalize_run(
    out_dir: &Path,
    command: &str,
    spec: serde_json::Value,
    inputs: BTreeMap<String, String>,
) -> Result<RunManifest> {
    let manifest = RunManifest {
        tool: crate::TOOL_NAME.into(),
        version: crate::TOOL_VERSION.into(),
        command: command.into(),
        spec,
        inputs,
        outputs: hash_outputs(out_dir)?,
    };
    write_manifest(out_dir, &manifest)?;
    Ok(manifest)
}
