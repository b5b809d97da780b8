//! `generate`: write a synthetic cohort with its patch features, heatmaps,
//! reference tumor masks, and hidden ground truth.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use survmil_core::mask::binarize;
use survmil_core::synth::{generate, GeneratorConfig};

use crate::error::{CliError, Result};
use crate::formats::{write_cohort, write_heatmap, write_mask, write_matrix, CohortEntry, MatrixSidecar};
use crate::manifest::{finalize_run, RunManifest};

/// Resolved generate run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub config: GeneratorConfig,
}

/// Threshold used to derive the reference tumor masks from the heatmaps;
/// generation guarantees exact recovery at this value.
const TRUTH_THRESHOLD: f32 = 0.5;

pub fn run(spec: &GenerateSpec, out_dir: &Path) -> Result<RunManifest> {
    super::prepare_out_dir(out_dir)?;
    let cohort = generate(&spec.config)?;

    // cohort manifest
    let entries: Vec<CohortEntry> = (0..cohort.n_cases())
        .map(|i| {
            let cov = &cohort.covariates[i];
            CohortEntry {
                case_id: cohort.records[i].case_id.clone(),
                time_months: cohort.records[i].time_months,
                event: cohort.records[i].event,
                covariates: BTreeMap::from([
                    ("age".to_string(), cov.age_years),
                    ("female".to_string(), if cov.female { 1.0 } else { 0.0 }),
                    ("grade".to_string(), cov.grade as f64),
                    ("t4".to_string(), if cov.t4 { 1.0 } else { 0.0 }),
                ]),
                split: cohort.splits[i].as_str().to_string(),
            }
        })
        .collect();
    write_cohort(&out_dir.join("cohort.json"), &entries)?;

    // per-slide features, heatmaps, and reference masks
    let features_dir = super::subdir(out_dir, "features")?;
    let heatmaps_dir = super::subdir(out_dir, "heatmaps")?;
    let truth_dir = super::subdir(out_dir, "truth_masks")?;
    for (bag, slides) in cohort.bags.iter().zip(&cohort.heatmaps) {
        for (sp, hm) in bag.slides.iter().zip(slides) {
            let sidecar = MatrixSidecar {
                case_id: bag.case_id.clone(),
                slide_id: sp.slide_id.clone(),
                rows: sp.n_patches(),
                feature_dim: bag.feature_dim,
                coords: sp.coords().to_vec(),
            };
            write_matrix(&features_dir.join(&sp.slide_id), &sidecar, sp.features())?;
            write_heatmap(&heatmaps_dir.join(&hm.slide_id), &hm.grid)?;
            let truth = binarize(&hm.grid, TRUTH_THRESHOLD)?;
            write_mask(
                &truth_dir.join(&hm.slide_id),
                &truth,
                hm.grid.superpixel_um,
            )?;
        }
    }

    // hidden truth, kept separate from everything the pipeline reads
    let gt_path = out_dir.join("ground_truth.json");
    let gt_json = serde_json::to_string_pretty(&cohort.ground_truth)
        .map_err(CliError::json(&gt_path))?;
    std::fs::write(&gt_path, gt_json + "\n").map_err(CliError::io(&gt_path))?;

    let spec_json = serde_json::to_value(spec)
        .map_err(|e| CliError::Invalid(format!("spec serialization: {e}")))?;
    finalize_run(out_dir, "generate", spec_json, BTreeMap::new())
}
