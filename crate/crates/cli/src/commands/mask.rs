//! `mask`: build binary ROI masks from heatmaps, with the threshold given
//! directly or resolved from a tune-split recall target against reference
//! masks, and report segmentation metrics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use survmil_core::mask::{binarize, build_mask, seg_metrics, MaskParams};
use survmil_core::synth::Split;

use crate::error::{CliError, Result};
use crate::formats::{read_cohort, read_heatmap, read_mask, write_mask};
use crate::manifest::{finalize_run, hash_path, RunManifest};

/// Resolved mask run. Exactly one of `threshold` / `recall_target` is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskSpec {
    pub in_dir: String,
    /// Reference masks for recall resolution and metrics.
    pub truth_dir: Option<String>,
    pub threshold: Option<f32>,
    /// Tune-split recall target in (0,1).
    pub recall_target: Option<f64>,
    pub dilation: usize,
    pub min_component: usize,
}

/// Candidate binarization thresholds examined during recall resolution.
fn threshold_grid() -> Vec<f32> {
    (1..100).map(|i| i as f32 / 100.0).collect()
}

struct SlideData {
    slide_id: String,
    split: Option<Split>,
    heatmap: survmil_core::mask::HeatmapGrid,
    truth: Option<survmil_core::mask::RoiMaskGrid>,
}

pub fn run(spec: &MaskSpec, out_dir: &Path) -> Result<RunManifest> {
    super::prepare_out_dir(out_dir)?;
    let in_dir = PathBuf::from(&spec.in_dir);
    if spec.threshold.is_none() && spec.recall_target.is_none() {
        return Err(CliError::Invalid(
            "either --threshold or --recall-target is required".into(),
        ));
    }
    if spec.threshold.is_some() && spec.recall_target.is_some() {
        return Err(CliError::Invalid(
            "--threshold and --recall-target are mutually exclusive".into(),
        ));
    }
    if spec.recall_target.is_some() && spec.truth_dir.is_none() {
        return Err(CliError::Invalid(
            "--recall-target needs reference masks (--truth-dir)".into(),
        ));
    }

    // slide -> case -> split mapping comes from the feature sidecars
    let cohort = read_cohort(&in_dir.join("cohort.json"))?;
    let split_of_case: BTreeMap<&str, Split> = cohort
        .entries
        .iter()
        .zip(&cohort.splits)
        .map(|(e, &s)| (e.case_id.as_str(), s))
        .collect();
    let mut slide_split: BTreeMap<String, Split> = BTreeMap::new();
    for stem in crate::formats::list_sidecars(&in_dir.join("features"))? {
        let sidecar = crate::formats::read_matrix_sidecar(&stem)?;
        if let Some(&split) = split_of_case.get(sidecar.case_id.as_str()) {
            slide_split.insert(sidecar.slide_id, split);
        }
    }

    let heatmap_dir = in_dir.join("heatmaps");
    let stems = crate::formats::list_sidecars(&heatmap_dir)?;
    if stems.is_empty() {
        return Err(CliError::Invalid(format!(
            "no heatmaps under {}",
            heatmap_dir.display()
        )));
    }
    let truth_dir = spec.truth_dir.as_ref().map(PathBuf::from);
    let mut slides = Vec::with_capacity(stems.len());
    for stem in &stems {
        let slide_id = stem
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let heatmap = read_heatmap(stem)?;
        let truth = match &truth_dir {
            Some(dir) => {
                let tstem = dir.join(&slide_id);
                if tstem.with_extension("json").exists() {
                    Some(read_mask(&tstem)?)
                } else {
                    None
                }
            }
            None => None,
        };
        slides.push(SlideData {
            split: slide_split.get(&slide_id).copied(),
            slide_id,
            heatmap,
            truth,
        });
    }

    // pooled recall of the binarized heatmaps on one split
    let pooled_metrics = |threshold: f32, split: Option<Split>| -> Result<Option<(f64, f64, f64)>> {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fng = 0usize;
        for s in slides.iter() {
            if split.is_some() && s.split != split {
                continue;
            }
            let Some(truth) = &s.truth else { continue };
            let pred = binarize(&s.heatmap, threshold)?;
            for (p, t) in pred.bits.iter().zip(&truth.bits) {
                match (p, t) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fng += 1,
                    _ => {}
                }
            }
        }
        if tp + fng == 0 || tp + fp == 0 {
            return Ok(None);
        }
        Ok(Some((
            tp as f64 / (tp + fng) as f64,
            tp as f64 / (tp + fp) as f64,
            tp as f64 / (tp + fp + fng) as f64,
        )))
    };

    // resolve the threshold
    let threshold = match (spec.threshold, spec.recall_target) {
        (Some(t), None) => t,
        (None, Some(target)) => {
            if !(0.0..1.0).contains(&target) || target <= 0.0 {
                return Err(CliError::Invalid(format!(
                    "recall target {target} outside (0,1)"
                )));
            }
            let mut rows = Vec::new();
            for t in threshold_grid() {
                if let Some((recall, _, _)) = pooled_metrics(t, Some(Split::Tune))? {
                    rows.push((t, recall));
                }
            }
            if rows.is_empty() {
                return Err(CliError::Invalid(
                    "no tune-split slides with reference masks".into(),
                ));
            }
            // the threshold whose tune recall is closest to the target from
            // below; if every candidate overshoots, take the smallest recall
            let chosen = rows
                .iter()
                .filter(|(_, r)| *r <= target)
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .or_else(|| {
                    rows.iter()
                        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                })
                .expect("nonempty rows")
                .0;
            // write the resolution grid
            let path = out_dir.join("threshold_resolution.csv");
            let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
            w.write_record(["threshold", "tune_recall", "chosen"])?;
            for (t, r) in &rows {
                w.write_record([
                    format!("{t}"),
                    format!("{r}"),
                    format!("{}", (*t == chosen) as u8),
                ])?;
            }
            w.flush().map_err(CliError::io(&path))?;
            chosen
        }
        _ => unreachable!("validated above"),
    };

    let params = MaskParams::new(threshold, spec.dilation, spec.min_component)?;

    // write the masks
    let masks_dir = super::subdir(out_dir, "masks")?;
    for s in &slides {
        let mask = build_mask(&s.heatmap, &params)?;
        write_mask(&masks_dir.join(&s.slide_id), &mask, s.heatmap.superpixel_um)?;
    }

    // segmentation metrics of the binarized output per split, when reference
    // masks exist
    if slides.iter().any(|s| s.truth.is_some()) {
        let path = out_dir.join("seg_metrics.csv");
        let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
        w.write_record(["split", "threshold", "recall", "precision", "iou"])?;
        for split in Split::ALL {
            if let Some((recall, precision, iou)) = pooled_metrics(threshold, Some(split))? {
                w.write_record([
                    split.as_str().to_string(),
                    format!("{threshold}"),
                    format!("{recall}"),
                    format!("{precision}"),
                    format!("{iou}"),
                ])?;
            }
        }
        // also per-slide rows for the final (denoised, dilated) masks
        w.flush().map_err(CliError::io(&path))?;

        let path = out_dir.join("mask_metrics.csv");
        let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
        w.write_record(["slide_id", "recall", "precision", "iou"])?;
        for s in &slides {
            let Some(truth) = &s.truth else { continue };
            let mask = build_mask(&s.heatmap, &params)?;
            match seg_metrics(&mask, truth) {
                Ok(m) => {
                    w.write_record([
                        s.slide_id.clone(),
                        format!("{}", m.recall),
                        format!("{}", m.precision),
                        format!("{}", m.iou),
                    ])?;
                }
                Err(_) => {
                    // empty prediction or truth: metrics undefined for this slide
                    w.write_record([s.slide_id.clone(), String::new(), String::new(), String::new()])?;
                }
            }
        }
        w.flush().map_err(CliError::io(&path))?;
    }

    // record resolved parameters for downstream reproducibility
    let resolved = serde_json::json!({
        "threshold": threshold,
        "dilation": spec.dilation,
        "min_component": spec.min_component,
    });
    let params_path = out_dir.join("mask_params.json");
    std::fs::write(
        &params_path,
        serde_json::to_string_pretty(&resolved).map_err(CliError::json(&params_path))? + "\n",
    )
    .map_err(CliError::io(&params_path))?;

    let mut inputs = BTreeMap::new();
    inputs.insert(
        format!("{}", in_dir.join("cohort.json").display()),
        hash_path(&in_dir.join("cohort.json"))?,
    );
    inputs.insert(
        format!("{}", heatmap_dir.display()),
        hash_path(&heatmap_dir)?,
    );
    if let Some(dir) = &truth_dir {
        inputs.insert(format!("{}", dir.display()), hash_path(dir)?);
    }
    let spec_json = serde_json::to_value(spec)
        .map_err(|e| CliError::Invalid(format!("spec serialization: {e}")))?;
    finalize_run(out_dir, "mask", spec_json, inputs)
}
