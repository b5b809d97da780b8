//! Versioned binary model snapshots: a magic tag, a JSON header, and the
//! flat f64 parameter payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use survmil_core::mil::{
    Ensemble, EnsembleMember, MilModel, ModelShape, ScoreStats, TrainConfig,
};

use crate::error::{CliError, Result};

const SNAPSHOT_MAGIC: &[u8; 8] = b"SVMLSNAP";
const ENSEMBLE_MAGIC: &[u8; 8] = b"SVMLENSB";
const FORMAT_VERSION: u32 = 1;

/// JSON header of a single-model snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub config: TrainConfig,
    pub step: u64,
    pub tune_metric: f64,
    pub shape: ModelShape,
}

/// A model together with its snapshot header.
#[derive(Debug, Clone)]
pub struct ModelSnapshot {
    pub header: SnapshotHeader,
    pub model: MilModel,
}

fn write_container(path: &Path, magic: &[u8; 8], header_json: &str, params: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(20 + header_json.len() + params.len() * 8);
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(header_json.as_bytes());
    for &p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

fn read_container(path: &Path, magic: &[u8; 8]) -> Result<(String, Vec<f64>)> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    if bytes.len() < 20 || &bytes[0..8] != magic {
        return Err(CliError::Invalid(format!(
            "{}: not a {} file",
            path.display(),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(CliError::Invalid(format!(
            "{}: unsupported format version {version}",
            path.display()
        )));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() < 20 + header_len || (bytes.len() - 20 - header_len) % 8 != 0 {
        return Err(CliError::Invalid(format!(
            "{}: truncated snapshot",
            path.display()
        )));
    }
    let header = String::from_utf8(bytes[20..20 + header_len].to_vec())
        .map_err(|_| CliError::Invalid(format!("{}: malformed header", path.display())))?;
    let params = bytes[20 + header_len..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, params))
}

/// Write a model snapshot.
pub fn write_snapshot(path: &Path, header: &SnapshotHeader, model: &MilModel) -> Result<()> {
    let json = serde_json::to_string(header).map_err(CliError::json(path))?;
    write_container(path, SNAPSHOT_MAGIC, &json, &model.to_flat())
}

/// Read a model snapshot.
pub fn read_snapshot(path: &Path) -> Result<ModelSnapshot> {
    let (header_json, params) = read_container(path, SNAPSHOT_MAGIC)?;
    let header: SnapshotHeader =
        serde_json::from_str(&header_json).map_err(CliError::json(path))?;
    let model = MilModel::from_flat(&header.shape, &params)?;
    Ok(ModelSnapshot { header, model })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnsembleMemberHeader {
    step: u64,
    tune_metric: f64,
    score_mean: f64,
    score_std: f64,
    shape: ModelShape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnsembleHeader {
    members: Vec<EnsembleMemberHeader>,
}

/// Write an ensemble: member headers plus concatenated parameters.
/// `steps[i]` records the training step each member was taken from.
pub fn write_ensemble(path: &Path, ensemble: &Ensemble, steps: &[u64]) -> Result<()> {
    if steps.len() != ensemble.members.len() {
        return Err(CliError::Invalid(format!(
            "{} steps for {} members",
            steps.len(),
            ensemble.members.len()
        )));
    }
    let mut params = Vec::new();
    let mut members = Vec::new();
    for (m, &step) in ensemble.members.iter().zip(steps) {
        members.push(EnsembleMemberHeader {
            step,
            tune_metric: m.tune_cindex,
            score_mean: m.stats.mean,
            score_std: m.stats.std,
            shape: m.model.shape(),
        });
        params.extend_from_slice(&m.model.to_flat());
    }
    let json =
        serde_json::to_string(&EnsembleHeader { members }).map_err(CliError::json(path))?;
    write_container(path, ENSEMBLE_MAGIC, &json, &params)
}

/// Read an ensemble and the per-member training steps.
pub fn read_ensemble(path: &Path) -> Result<(Ensemble, Vec<u64>)> {
    let (header_json, params) = read_container(path, ENSEMBLE_MAGIC)?;
    let header: EnsembleHeader =
        serde_json::from_str(&header_json).map_err(CliError::json(path))?;
    let mut members = Vec::with_capacity(header.members.len());
    let mut steps = Vec::with_capacity(header.members.len());
    let mut pos = 0usize;
    for mh in header.members {
        let count = mh.shape.param_count();
        if pos + count > params.len() {
            return Err(CliError::Invalid(format!(
                "{}: parameter payload shorter than member headers declare",
                path.display()
            )));
        }
        let model = MilModel::from_flat(&mh.shape, &params[pos..pos + count])?;
        pos += count;
        members.push(EnsembleMember {
            model,
            tune_cindex: mh.tune_metric,
            stats: ScoreStats {
                mean: mh.score_mean,
                std: mh.score_std,
            },
        });
        steps.push(mh.step);
    }
    if pos != params.len() {
        return Err(CliError::Invalid(format!(
            "{}: trailing bytes after the last member",
            path.display()
        )));
    }
    Ok((Ensemble { members }, steps))
}
