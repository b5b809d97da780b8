//! Command implementations. Each command takes a serializable spec (recorded
//! verbatim in the run manifest) plus an output directory, and returns the
//! finished manifest.

pub mod eval;
pub mod explain;
pub mod generate;
pub mod mask;
pub mod replay;
pub mod search;
pub mod train;

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

/// Create the run directory (and parents). Refuses to reuse a directory that
/// already holds a manifest, so runs are never silently overwritten.
pub fn prepare_out_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let manifest = out_dir.join(crate::manifest::MANIFEST_FILE);
    if manifest.exists() {
        return Err(CliError::Invalid(format!(
            "{} already contains a run manifest; choose a fresh --out-dir",
            out_dir.display()
        )));
    }
    Ok(())
}

pub(crate) fn subdir(out_dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    let dir = out_dir.join(name);
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    Ok(dir)
}
