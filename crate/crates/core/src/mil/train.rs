//! Training loop, checkpointing, and checkpoint selection.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::adam::{adam_step, AdamParams, AdamState, LrSchedule};
use super::bag::{sample_bag, BagSampling, CaseBag};
use super::model::{encoder_widths, MilModel, ModelShape};
use crate::error::{Error, Result};
use crate::seeds::{child_rng, stream};
use crate::survival::{concordance_index, SurvivalRecord};

/// Training configuration. The defaults are desk-scale: 20,000 steps with an
/// evaluation every 200; production-scale values (2,000,000 / 10,000) remain
/// expressible through the same fields.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    /// Patches sampled per case to form one training example.
    pub bag_size: usize,
    /// Cases per training batch.
    pub batch_size: usize,
    pub learning_rate: LrSchedule,
    pub l2_weight: f64,
    pub adam: AdamParams,
    /// Encoder architecture knobs.
    pub n_layers: usize,
    pub base_depth: usize,
    pub depth_growth: f64,
    pub max_depth: usize,
    pub total_steps: u64,
    pub eval_every: u64,
    /// Patches sampled per case when scoring the tune split.
    pub eval_patches_per_case: usize,
    /// Rolling-average window for checkpoint smoothing.
    pub rolling_window: usize,
    pub bag_sampling: BagSampling,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            bag_size: 16,
            batch_size: 64,
            learning_rate: LrSchedule {
                initial: 5e-4,
                decay_steps: 10_000,
                decay_rate: 0.95,
            },
            l2_weight: 1e-4,
            adam: AdamParams::default(),
            n_layers: 2,
            base_depth: 32,
            depth_growth: 1.5,
            max_depth: 64,
            total_steps: 20_000,
            eval_every: 200,
            eval_patches_per_case: 1024,
            rolling_window: 10,
            bag_sampling: BagSampling::AcrossCase,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bag_size", self.bag_size),
            ("batch_size", self.batch_size),
            ("n_layers", self.n_layers),
            ("base_depth", self.base_depth),
            ("max_depth", self.max_depth),
            ("eval_patches_per_case", self.eval_patches_per_case),
            ("rolling_window", self.rolling_window),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        if self.total_steps == 0 || self.eval_every == 0 {
            return Err(Error::InvalidArgument(format!(
                "total_steps and eval_every must be >= 1"
            )));
        }
        if !(self.depth_growth > 0.0) || !(self.l2_weight >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "depth_growth must be positive and l2_weight nonnegative"
            )));
        }
        self.learning_rate.validate()
    }

    pub fn encoder_widths(&self) -> Vec<usize> {
        encoder_widths(self.n_layers, self.base_depth, self.depth_growth, self.max_depth)
    }

    pub fn model_shape(&self, feature_dim: usize) -> Result<ModelShape> {
        ModelShape::new(feature_dim, self.encoder_widths())
    }
}

/// Model snapshot at an evaluation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub model: MilModel,
    /// Tune-split c-index at this step.
    pub tune_metric: f64,
    /// Mean of the trailing `rolling_window` tune metrics, once that many
    /// evaluations exist.
    pub smoothed_metric: Option<f64>,
}

/// One training-log row (written at every evaluation).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub loss: f64,
    pub tune_cindex: f64,
    pub smoothed: Option<f64>,
}

/// Checkpoints and log of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub checkpoints: Vec<Checkpoint>,
    pub log: Vec<TrainLogRow>,
}

const MAX_BATCH_RESAMPLES: usize = 10;

/// Score cases by sampling `patches_per_case` patches each under a fixed
/// evaluation seed (derived per case), so scores are comparable across
/// checkpoints.
pub fn case_scores(
    model: &MilModel,
    bags: &[CaseBag],
    patches_per_case: usize,
    sampling: BagSampling,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(bags.len());
    for (i, case) in bags.iter().enumerate() {
        let mut rng = child_rng(seed, stream::TRAIN_EVAL, i as u64);
        let patches = sample_bag(case, patches_per_case, sampling, &mut rng)?;
        scores.push(model.forward_bag(&patches)?.case_score);
    }
    Ok(scores)
}

fn check_alignment(bags: &[CaseBag], records: &[SurvivalRecord], what: &str) -> Result<()> {
    if bags.is_empty() {
        return Err(Error::EmptyInput(if what == "train" {
            "train split"
        } else {
            "tune split"
        }));
    }
    if bags.len() != records.len() {
        return Err(Error::LengthMismatch {
            expected: records.len(),
            got: bags.len(),
        });
    }
    for (b, r) in bags.iter().zip(records) {
        if b.case_id != r.case_id {
            return Err(Error::InvalidArgument(format!(
                "bag/record order mismatch: {} vs {}",
                b.case_id, r.case_id
            )));
        }
    }
    Ok(())
}

/// Train one model: sample → forward → loss → gradients → Adam, evaluating
/// the tune split every `eval_every` steps. Fully deterministic in
/// `(config.seed, data)`.
pub fn train(
    train_bags: &[CaseBag],
    train_records: &[SurvivalRecord],
    tune_bags: &[CaseBag],
    tune_records: &[SurvivalRecord],
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    check_alignment(train_bags, train_records, "train")?;
    check_alignment(tune_bags, tune_records, "tune")?;
    let feature_dim = check_feature_dims(train_bags, tune_bags)?;
    let shape = config.model_shape(feature_dim)?;
    let initial = MilModel::init(&shape, config.seed);
    train_loop(initial, 0, train_bags, train_records, tune_bags, tune_records, config)
}

/// Continue training from a snapshot taken at `start_step`. Batch
/// randomness is keyed per step, so the resumed steps draw the same batches
/// a straight run would have; optimizer moments restart from zero.
pub fn train_resumed(
    initial: MilModel,
    start_step: u64,
    train_bags: &[CaseBag],
    train_records: &[SurvivalRecord],
    tune_bags: &[CaseBag],
    tune_records: &[SurvivalRecord],
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    check_alignment(train_bags, train_records, "train")?;
    check_alignment(tune_bags, tune_records, "tune")?;
    let feature_dim = check_feature_dims(train_bags, tune_bags)?;
    if initial.feature_dim() != feature_dim {
        return Err(Error::LengthMismatch {
            expected: feature_dim,
            got: initial.feature_dim(),
        });
    }
    if start_step >= config.total_steps {
        return Err(Error::InvalidArgument(format!(
            "start step {start_step} is not before total_steps {}",
            config.total_steps
        )));
    }
    train_loop(
        initial,
        start_step,
        train_bags,
        train_records,
        tune_bags,
        tune_records,
        config,
    )
}

fn check_feature_dims(train_bags: &[CaseBag], tune_bags: &[CaseBag]) -> Result<usize> {
    let feature_dim = train_bags[0].feature_dim;
    for b in train_bags.iter().chain(tune_bags) {
        if b.feature_dim != feature_dim {
            return Err(Error::LengthMismatch {
                expected: feature_dim,
                got: b.feature_dim,
            });
        }
    }
    Ok(feature_dim)
}

#[allow(clippy::too_many_arguments)]
fn train_loop(
    initial: MilModel,
    start_step: u64,
    train_bags: &[CaseBag],
    train_records: &[SurvivalRecord],
    tune_bags: &[CaseBag],
    tune_records: &[SurvivalRecord],
    config: &TrainConfig,
) -> Result<TrainOutput> {
    let shape = initial.shape();
    let mut params = initial.to_flat();
    let mut adam_state = AdamState::new(params.len());

    let n_train = train_bags.len();
    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    let mut log: Vec<TrainLogRow> = Vec::new();
    let mut metric_history: Vec<f64> = Vec::new();
    let mut batch_indices: Vec<usize> = Vec::with_capacity(config.batch_size);
    let mut times: Vec<u32> = Vec::with_capacity(config.batch_size);
    let mut events: Vec<bool> = Vec::with_capacity(config.batch_size);

    for step in start_step..config.total_steps {
        // per-step generator: batches are independent of how the run was
        // segmented into resumes
        let mut step_rng = child_rng(config.seed, stream::TRAIN_BATCH, step);

        // draw a batch with at least one event
        let mut attempts = 0;
        loop {
            batch_indices.clear();
            if config.batch_size <= n_train {
                for idx in rand::seq::index::sample(&mut step_rng, n_train, config.batch_size) {
                    batch_indices.push(idx);
                }
            } else {
                for _ in 0..config.batch_size {
                    batch_indices.push(step_rng.random_range(0..n_train));
                }
            }
            if batch_indices.iter().any(|&i| train_records[i].event) {
                break;
            }
            attempts += 1;
            if attempts >= MAX_BATCH_RESAMPLES {
                return Err(Error::UninformativeBatch);
            }
        }

        times.clear();
        events.clear();
        let mut bags: Vec<Vec<&[f64]>> = Vec::with_capacity(batch_indices.len());
        for &i in &batch_indices {
            times.push(train_records[i].time_months);
            events.push(train_records[i].event);
            bags.push(sample_bag(
                &train_bags[i],
                config.bag_size,
                config.bag_sampling,
                &mut step_rng,
            )?);
        }

        let model = MilModel::from_flat(&shape, &params)?;
        let (loss, grad) = model.batch_loss_and_grad(&bags, &times, &events, config.l2_weight)?;
        adam_step(
            &mut params,
            &grad,
            &mut adam_state,
            &config.adam,
            &config.learning_rate,
            step,
        )?;

        if (step + 1) % config.eval_every == 0 {
            let model = MilModel::from_flat(&shape, &params)?;
            let tune_scores = case_scores(
                &model,
                tune_bags,
                config.eval_patches_per_case,
                config.bag_sampling,
                config.seed,
            )?;
            let tune_metric = concordance_index(&tune_scores, tune_records)?;
            metric_history.push(tune_metric);
            let smoothed = if metric_history.len() >= config.rolling_window {
                let tail = &metric_history[metric_history.len() - config.rolling_window..];
                Some(tail.iter().sum::<f64>() / config.rolling_window as f64)
            } else {
                None
            };
            checkpoints.push(Checkpoint {
                step: step + 1,
                model,
                tune_metric,
                smoothed_metric: smoothed,
            });
            log.push(TrainLogRow {
                step: step + 1,
                loss,
                tune_cindex: tune_metric,
                smoothed,
            });
        }
    }

    Ok(TrainOutput { checkpoints, log })
}

/// The checkpoint whose trailing-window mean of the tune metric is maximal;
/// ties resolve to the latest step.
pub fn select_checkpoint(checkpoints: &[Checkpoint], window: usize) -> Result<&Checkpoint> {
    if window == 0 {
        return Err(Error::InvalidArgument(String::from("window must be >= 1")));
    }
    if checkpoints.len() < window {
        return Err(Error::TooFewCheckpoints {
            have: checkpoints.len(),
            need: window,
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in checkpoints.iter().enumerate() {
        if i + 1 < window {
            continue;
        }
        let mean = checkpoints[i + 1 - window..=i]
            .iter()
            .map(|c| c.tune_metric)
            .sum::<f64>()
            / window as f64;
        debug_assert!(
            c.smoothed_metric.is_none() || (c.smoothed_metric.unwrap() - mean).abs() < 1e-12
        );
        match best {
            Some((_, best_mean)) if mean < best_mean => {}
            _ => best = Some((i, mean)),
        }
    }
    Ok(&checkpoints[best.expect("nonempty window means").0])
}
