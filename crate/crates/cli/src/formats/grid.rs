//! Heatmap (f32) and mask (u8) grid files with JSON sidecars
//! `{width, height, superpixel_um, dtype}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use survmil_core::mask::{HeatmapGrid, RoiMaskGrid};

use crate::error::{CliError, Result};

/// Sidecar of one grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub width: usize,
    pub height: usize,
    pub superpixel_um: f32,
    /// "f32le" for heatmaps, "u8" for masks.
    pub dtype: String,
}

fn write_sidecar(stem: &Path, sidecar: &GridSidecar) -> Result<()> {
    let json_path = stem.with_extension("json");
    let json = serde_json::to_string_pretty(sidecar).map_err(CliError::json(&json_path))?;
    fs::write(&json_path, json + "\n").map_err(CliError::io(&json_path))
}

fn read_sidecar(stem: &Path) -> Result<GridSidecar> {
    let json_path = stem.with_extension("json");
    let raw = fs::read_to_string(&json_path).map_err(CliError::io(&json_path))?;
    serde_json::from_str(&raw).map_err(CliError::json(&json_path))
}

/// Write `<stem>.f32` + `<stem>.json` for a heatmap.
pub fn write_heatmap(stem: &Path, grid: &HeatmapGrid) -> Result<()> {
    let bin_path = stem.with_extension("f32");
    let mut bytes = Vec::with_capacity(grid.values.len() * 4);
    for &v in &grid.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin_path, bytes).map_err(CliError::io(&bin_path))?;
    write_sidecar(
        stem,
        &GridSidecar {
            width: grid.width,
            height: grid.height,
            superpixel_um: grid.superpixel_um,
            dtype: "f32le".into(),
        },
    )
}

/// Read a heatmap by stem.
pub fn read_heatmap(stem: &Path) -> Result<HeatmapGrid> {
    let sidecar = read_sidecar(stem)?;
    if sidecar.dtype != "f32le" {
        return Err(CliError::Invalid(format!(
            "{}: dtype {} is not a heatmap",
            stem.display(),
            sidecar.dtype
        )));
    }
    let bin_path = stem.with_extension("f32");
    let bytes = fs::read(&bin_path).map_err(CliError::io(&bin_path))?;
    if bytes.len() != sidecar.width * sidecar.height * 4 {
        return Err(CliError::Invalid(format!(
            "{}: byte count does not match sidecar dimensions",
            bin_path.display()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(HeatmapGrid::new(
        sidecar.width,
        sidecar.height,
        values,
        sidecar.superpixel_um,
    )?)
}

/// Write `<stem>.u8` + `<stem>.json` for a binary mask.
pub fn write_mask(stem: &Path, mask: &RoiMaskGrid, superpixel_um: f32) -> Result<()> {
    let bin_path = stem.with_extension("u8");
    let bytes: Vec<u8> = mask.bits.iter().map(|&b| b as u8).collect();
    fs::write(&bin_path, bytes).map_err(CliError::io(&bin_path))?;
    write_sidecar(
        stem,
        &GridSidecar {
            width: mask.width,
            height: mask.height,
            superpixel_um,
            dtype: "u8".into(),
        },
    )
}

/// Read a mask by stem.
pub fn read_mask(stem: &Path) -> Result<RoiMaskGrid> {
    let sidecar = read_sidecar(stem)?;
    if sidecar.dtype != "u8" {
        return Err(CliError::Invalid(format!(
            "{}: dtype {} is not a mask",
            stem.display(),
            sidecar.dtype
        )));
    }
    let bin_path = stem.with_extension("u8");
    let bytes = fs::read(&bin_path).map_err(CliError::io(&bin_path))?;
    if bytes.len() != sidecar.width * sidecar.height {
        return Err(CliError::Invalid(format!(
            "{}: byte count does not match sidecar dimensions",
            bin_path.display()
        )));
    }
    Ok(RoiMaskGrid::new(
        sidecar.width,
        sidecar.height,
        bytes.iter().map(|&b| b != 0).collect(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_and_mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let h = HeatmapGrid::new(3, 2, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125], 32.0).unwrap();
        let stem = dir.path().join("slide0");
        write_heatmap(&stem, &h).unwrap();
        assert_eq!(read_heatmap(&stem).unwrap(), h);

        let m = RoiMaskGrid::new(2, 2, vec![true, false, false, true]).unwrap();
        let mstem = dir.path().join("slide0_mask");
        write_mask(&mstem, &m, 32.0).unwrap();
        assert_eq!(read_mask(&mstem).unwrap(), m);
        // dtype mismatch is caught
        assert!(read_mask(&stem).is_err());
    }
}
