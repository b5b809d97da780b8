//! `train`: train model replicas, select each one's best checkpoint by the
//! rolling tune metric, and ensemble the top performers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use survmil_core::mil::{
    case_scores, ensemble_top, select_checkpoint, train, train_resumed, CaseBag, TrainConfig,
    TrainOutput, TrainedCandidate,
};
use survmil_core::seeds::{child_seed, stream};
use survmil_core::survival::SurvivalRecord;
use survmil_core::synth::Split;

use crate::error::{CliError, Result};
use crate::formats::{
    read_cohort, read_snapshot, write_ensemble, write_snapshot, SnapshotHeader,
};
use crate::manifest::{finalize_run, hash_path, RunManifest};
use crate::pipeline::{load_dataset, required_split};

/// Resolved train run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    pub in_dir: String,
    pub mask_dir: Option<String>,
    pub config: TrainConfig,
    /// Model replicas to train (per-replica seeds derive from config.seed).
    pub models: usize,
    /// Members kept in the ensemble.
    pub ensemble_size: usize,
    /// Continue a single model from this snapshot.
    pub resume: Option<String>,
    /// Worker threads for replica training.
    pub threads: usize,
}

pub fn run(spec: &TrainSpec, out_dir: &Path) -> Result<RunManifest> {
    super::prepare_out_dir(out_dir)?;
    if spec.models == 0 || spec.ensemble_size == 0 {
        return Err(CliError::Invalid(
            "--models and --ensemble-size must be at least 1".into(),
        ));
    }
    if spec.ensemble_size > spec.models {
        return Err(CliError::Invalid(format!(
            "cannot ensemble {} of {} models",
            spec.ensemble_size, spec.models
        )));
    }
    let in_dir = PathBuf::from(&spec.in_dir);
    let cohort = read_cohort(&in_dir.join("cohort.json"))?;
    let mask_dir = spec.mask_dir.as_ref().map(PathBuf::from);
    let dataset = load_dataset(&in_dir, cohort, mask_dir.as_deref())?;

    let train_idx = required_split(&dataset.cohort, Split::Train)?;
    let tune_idx = required_split(&dataset.cohort, Split::Tune)?;
    let train_bags = dataset.bags_for(&train_idx);
    let train_records = dataset.records_for(&train_idx);
    let tune_bags = dataset.bags_for(&tune_idx);
    let tune_records = dataset.records_for(&tune_idx);

    // per-replica configs with derived seeds
    let mut configs = Vec::with_capacity(spec.models);
    for m in 0..spec.models {
        let mut c = spec.config.clone();
        c.seed = child_seed(spec.config.seed, stream::TRAIN_INIT, m as u64);
        configs.push(c);
    }

    let outputs: Vec<Result<TrainOutput>> = if let Some(resume_path) = &spec.resume {
        if spec.models != 1 {
            return Err(CliError::Invalid(
                "--resume trains a single model (--models 1)".into(),
            ));
        }
        let snapshot = read_snapshot(Path::new(resume_path))?;
        let mut config = spec.config.clone();
        config.seed = snapshot.header.config.seed;
        configs[0] = config.clone();
        vec![train_resumed(
            snapshot.model,
            snapshot.header.step,
            &train_bags,
            &train_records,
            &tune_bags,
            &tune_records,
            &config,
        )
        .map_err(CliError::from)]
    } else {
        run_replicas(
            &configs,
            spec.threads.max(1),
            &train_bags,
            &train_records,
            &tune_bags,
            &tune_records,
        )
    };

    // per-model logs, snapshots, and candidates
    let mut candidates = Vec::with_capacity(spec.models);
    let mut best_steps = Vec::with_capacity(spec.models);
    let models_csv = out_dir.join("models.csv");
    let mut models_writer = csv::Writer::from_path(&models_csv).map_err(CliError::from)?;
    models_writer.write_record(["model", "seed", "best_step", "tune_cindex", "smoothed"])?;
    for (m, output) in outputs.into_iter().enumerate() {
        let output = output?;
        let log_path = out_dir.join(format!("training_log_{m}.csv"));
        let mut w = csv::Writer::from_path(&log_path).map_err(CliError::from)?;
        w.write_record(["step", "loss", "tune_cindex", "smoothed"])?;
        for row in &output.log {
            w.write_record([
                format!("{}", row.step),
                format!("{}", row.loss),
                format!("{}", row.tune_cindex),
                row.smoothed.map(|s| format!("{s}")).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(CliError::io(&log_path))?;

        let best = select_checkpoint(&output.checkpoints, spec.config.rolling_window)?;
        let header = SnapshotHeader {
            config: configs[m].clone(),
            step: best.step,
            tune_metric: best.tune_metric,
            shape: best.model.shape(),
        };
        write_snapshot(&out_dir.join(format!("model_{m}.bin")), &header, &best.model)?;

        models_writer.write_record([
            format!("{m}"),
            format!("{}", configs[m].seed),
            format!("{}", best.step),
            format!("{}", best.tune_metric),
            best.smoothed_metric
                .map(|s| format!("{s}"))
                .unwrap_or_default(),
        ])?;

        let tune_scores = case_scores(
            &best.model,
            &tune_bags,
            configs[m].eval_patches_per_case,
            configs[m].bag_sampling,
            configs[m].seed,
        )?;
        best_steps.push(best.step);
        candidates.push(TrainedCandidate {
            model: best.model.clone(),
            tune_cindex: best.tune_metric,
            tune_scores,
        });
    }
    models_writer.flush().map_err(CliError::io(&models_csv))?;

    // order ensembled member steps to match the selected candidates
    let ordered_steps: Vec<u64> = {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            candidates[b]
                .tune_cindex
                .partial_cmp(&candidates[a].tune_cindex)
                .expect("finite tune metric")
                .then(a.cmp(&b))
        });
        order
            .iter()
            .take(spec.ensemble_size)
            .map(|&i| best_steps[i])
            .collect()
    };
    let ensemble = ensemble_top(candidates, spec.ensemble_size)?;
    write_ensemble(&out_dir.join("ensemble.bin"), &ensemble, &ordered_steps)?;

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
    if let Some(resume) = &spec.resume {
        inputs.insert(resume.clone(), hash_path(Path::new(resume))?);
    }
    let spec_json = serde_json::to_value(spec)
        .map_err(|e| CliError::Invalid(format!("spec serialization: {e}")))?;
    finalize_run(out_dir, "train", spec_json, inputs)
}

/// Train replicas on up to `threads` workers; results come back in replica
/// order regardless of scheduling.
fn run_replicas(
    configs: &[TrainConfig],
    threads: usize,
    train_bags: &[CaseBag],
    train_records: &[SurvivalRecord],
    tune_bags: &[CaseBag],
    tune_records: &[SurvivalRecord],
) -> Vec<Result<TrainOutput>> {
    let mut results: Vec<Option<Result<TrainOutput>>> = (0..configs.len()).map(|_| None).collect();
    for chunk_start in (0..configs.len()).step_by(threads) {
        let chunk_end = (chunk_start + threads).min(configs.len());
        let chunk_results: Vec<(usize, Result<TrainOutput>)> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for m in chunk_start..chunk_end {
                let config = &configs[m];
                handles.push((
                    m,
                    scope.spawn(move || {
                        train(train_bags, train_records, tune_bags, tune_records, config)
                            .map_err(CliError::from)
                    }),
                ));
            }
            handles
                .into_iter()
                .map(|(m, h)| (m, h.join().expect("training thread panicked")))
                .collect()
        });
        for (m, r) in chunk_results {
            results[m] = Some(r);
        }
    }
    results.into_iter().map(|r| r.expect("all replicas ran")).collect()
}
