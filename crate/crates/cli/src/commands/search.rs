//! `search`: random hyperparameter search ranked by the best smoothed tune
//! c-index.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use survmil_core::mil::{hyperparam_search, SearchSpace, TrainConfig};
use survmil_core::synth::Split;

use crate::error::{CliError, Result};
use crate::formats::read_cohort;
use crate::manifest::{finalize_run, hash_path, RunManifest};
use crate::pipeline::{load_dataset, required_split};

/// Resolved search run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpec {
    pub in_dir: String,
    pub mask_dir: Option<String>,
    pub base: TrainConfig,
    pub space: SearchSpace,
    pub n_configs: usize,
    pub seed: u64,
}

pub fn run(spec: &SearchSpec, out_dir: &Path) -> Result<RunManifest> {
    super::prepare_out_dir(out_dir)?;
    let in_dir = PathBuf::from(&spec.in_dir);
    let cohort = read_cohort(&in_dir.join("cohort.json"))?;
    let mask_dir = spec.mask_dir.as_ref().map(PathBuf::from);
    let dataset = load_dataset(&in_dir, cohort, mask_dir.as_deref())?;

    let train_idx = required_split(&dataset.cohort, Split::Train)?;
    let tune_idx = required_split(&dataset.cohort, Split::Tune)?;
    let outcomes = hyperparam_search(
        &spec.space,
        &spec.base,
        spec.n_configs,
        spec.seed,
        &dataset.bags_for(&train_idx),
        &dataset.records_for(&train_idx),
        &dataset.bags_for(&tune_idx),
        &dataset.records_for(&tune_idx),
    )?;

    let path = out_dir.join("search_results.csv");
    let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
    w.write_record([
        "rank",
        "config_index",
        "learning_rate",
        "decay_steps",
        "decay_rate",
        "l2_weight",
        "n_layers",
        "base_depth",
        "depth_growth",
        "max_depth",
        "seed",
        "best_smoothed_cindex",
        "best_step",
        "failure",
    ])?;
    for (rank, o) in outcomes.iter().enumerate() {
        let c = &o.config;
        w.write_record([
            format!("{}", rank + 1),
            format!("{}", o.config_index),
            format!("{}", c.learning_rate.initial),
            format!("{}", c.learning_rate.decay_steps),
            format!("{}", c.learning_rate.decay_rate),
            format!("{}", c.l2_weight),
            format!("{}", c.n_layers),
            format!("{}", c.base_depth),
            format!("{}", c.depth_growth),
            format!("{}", c.max_depth),
            format!("{}", c.seed),
            o.best_smoothed.map(|v| format!("{v}")).unwrap_or_default(),
            o.best_step.map(|v| format!("{v}")).unwrap_or_default(),
            o.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(CliError::io(&path))?;

    let mut inputs = BTreeMap::new();
    inputs.insert(
        format!("{}", in_dir.join("cohort.json").display()),
        hash_path(&in_dir.join("cohort.json"))?,
    );
    inputs.insert(
        format!("{}", in_dir.join("features").display()),
        hash_path(&in_dir.join("features"))?,
    );
    if let Some(dir) = &mask_dir {
        inputs.insert(format!("{}", dir.display()), hash_path(dir)?);
    }
    let spec_json = serde_json::to_value(spec)
        .map_err(|e| CliError::Invalid(format!("spec serialization: {e}")))?;
    finalize_run(out_dir, "search", spec_json, inputs)
}
