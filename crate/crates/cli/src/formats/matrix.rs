//! Little-endian f32 row-major matrix files with JSON sidecars.
//!
//! A matrix `NAME.f32` pairs with `NAME.json` carrying
//! `{case_id, slide_id, rows, feature_dim, coords}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Sidecar of one matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub case_id: String,
    pub slide_id: String,
    pub rows: usize,
    pub feature_dim: usize,
    /// Superpixel origin of each row's patch; empty when rows are not
    /// patches (e.g. cluster centroids).
    pub coords: Vec<(u32, u32)>,
}

/// Write `<stem>.f32` and `<stem>.json`; data is truncated to f32.
pub fn write_matrix(stem: &Path, sidecar: &MatrixSidecar, data: &[f64]) -> Result<()> {
    if data.len() != sidecar.rows * sidecar.feature_dim {
        return Err(CliError::Invalid(format!(
            "matrix {} has {} values for {}x{}",
            stem.display(),
            data.len(),
            sidecar.rows,
            sidecar.feature_dim
        )));
    }
    let bin_path = stem.with_extension("f32");
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for &v in data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(&bin_path, bytes).map_err(CliError::io(&bin_path))?;
    let json_path = stem.with_extension("json");
    let json = serde_json::to_string_pretty(sidecar).map_err(CliError::json(&json_path))?;
    fs::write(&json_path, json + "\n").map_err(CliError::io(&json_path))
}

/// Read a matrix by its stem; returns the sidecar and f64-widened data.
pub fn read_matrix(stem: &Path) -> Result<(MatrixSidecar, Vec<f64>)> {
    let json_path = stem.with_extension("json");
    let raw = fs::read_to_string(&json_path).map_err(CliError::io(&json_path))?;
    let sidecar: MatrixSidecar =
        serde_json::from_str(&raw).map_err(CliError::json(&json_path))?;
    let bin_path = stem.with_extension("f32");
    let bytes = fs::read(&bin_path).map_err(CliError::io(&bin_path))?;
    let expected = sidecar.rows * sidecar.feature_dim * 4;
    if bytes.len() != expected {
        return Err(CliError::Invalid(format!(
            "{}: expected {expected} bytes, found {}",
            bin_path.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((sidecar, data))
}

/// Read only the sidecar of a matrix stem.
pub fn read_matrix_sidecar(stem: &Path) -> Result<MatrixSidecar> {
    let json_path = stem.with_extension("json");
    let raw = fs::read_to_string(&json_path).map_err(CliError::io(&json_path))?;
    serde_json::from_str(&raw).map_err(CliError::json(&json_path))
}

/// Stems of every `.json` sidecar in a directory, sorted for determinism.
pub fn list_sidecars(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut stems = Vec::new();
    let iter = fs::read_dir(dir).map_err(CliError::io(dir))?;
    for entry in iter {
        let entry = entry.map_err(CliError::io(dir))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            stems.push(path.with_extension(""));
        }
    }
    stems.sort();
    Ok(stems)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quantizes_to_f32() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("case0_s0");
        let sidecar = MatrixSidecar {
            case_id: "case0".into(),
            slide_id: "case0_s0".into(),
            rows: 2,
            feature_dim: 3,
            coords: vec![(0, 0), (16, 0)],
        };
        let data = vec![0.1, -1.5, 2.25, 0.0, 1e-3, 7.5];
        write_matrix(&stem, &sidecar, &data).unwrap();
        let (s2, d2) = read_matrix(&stem).unwrap();
        assert_eq!(s2, sidecar);
        for (a, b) in data.iter().zip(&d2) {
            assert_eq!(*a as f32, *b as f32);
        }
        assert_eq!(list_sidecars(dir.path()).unwrap(), vec![stem]);
    }
}
