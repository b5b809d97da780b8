//! Random hyperparameter search.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::bag::CaseBag;
use super::train::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::seeds::{child_rng, child_seed, stream};
use crate::survival::SurvivalRecord;

/// Candidate values per tunable field; each sampled configuration picks one
/// value per field uniformly.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SearchSpace {
    pub learning_rates: Vec<f64>,
    pub decay_steps: Vec<u64>,
    pub decay_rates: Vec<f64>,
    pub l2_weights: Vec<f64>,
    pub n_layers: Vec<usize>,
    pub base_depths: Vec<usize>,
    pub depth_growths: Vec<f64>,
    pub max_depths: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rates: vec![5e-3, 5e-4, 5e-5],
            decay_steps: vec![10_000, 20_000],
            decay_rates: vec![0.95, 0.99],
            l2_weights: vec![1e-3, 1e-4, 1e-5],
            n_layers: vec![1, 2],
            base_depths: vec![8, 16, 32],
            depth_growths: vec![1.25, 1.5, 2.0],
            max_depths: vec![64, 256],
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty()
            || self.decay_steps.is_empty()
            || self.decay_rates.is_empty()
            || self.l2_weights.is_empty()
            || self.n_layers.is_empty()
            || self.base_depths.is_empty()
            || self.depth_growths.is_empty()
            || self.max_depths.is_empty()
        {
            return Err(Error::EmptyInput("search space"));
        }
        Ok(())
    }
}

fn pick<T: Copy>(values: &[T], rng: &mut impl Rng) -> T {
    values[rng.random_range(0..values.len())]
}

/// Sample `n_configs` configurations uniformly from the space. Each config
/// carries its own derived training seed, so runs are independent and
/// reproducible.
pub fn sample_configs(
    space: &SearchSpace,
    base: &TrainConfig,
    n_configs: usize,
    seed: u64,
) -> Result<Vec<TrainConfig>> {
    space.validate()?;
    if n_configs == 0 {
        return Err(Error::InvalidArgument(format!("n_configs must be >= 1")));
    }
    let mut rng = child_rng(seed, stream::SEARCH_CONFIG, 0);
    let mut configs = Vec::with_capacity(n_configs);
    for i in 0..n_configs {
        let mut c = base.clone();
        c.learning_rate.initial = pick(&space.learning_rates, &mut rng);
        c.learning_rate.decay_steps = pick(&space.decay_steps, &mut rng);
        c.learning_rate.decay_rate = pick(&space.decay_rates, &mut rng);
        c.l2_weight = pick(&space.l2_weights, &mut rng);
        c.n_layers = pick(&space.n_layers, &mut rng);
        c.base_depth = pick(&space.base_depths, &mut rng);
        c.depth_growth = pick(&space.depth_growths, &mut rng);
        c.max_depth = pick(&space.max_depths, &mut rng);
        c.seed = child_seed(seed, stream::SEARCH_TRAIN, i as u64);
        configs.push(c);
    }
    Ok(configs)
}

/// Outcome of one searched configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Index into the sampled configuration list.
    pub config_index: usize,
    pub config: TrainConfig,
    /// Best rolling-window tune c-index across checkpoints.
    pub best_smoothed: Option<f64>,
    /// Step of that best checkpoint.
    pub best_step: Option<u64>,
    /// Failure reason when training did not produce a ranked metric.
    pub failure: Option<String>,
}

/// Train every sampled configuration and rank by the best smoothed tune
/// c-index (descending); failed configurations sort last, carrying their
/// error text.
pub fn hyperparam_search(
    space: &SearchSpace,
    base: &TrainConfig,
    n_configs: usize,
    seed: u64,
    train_bags: &[CaseBag],
    train_records: &[SurvivalRecord],
    tune_bags: &[CaseBag],
    tune_records: &[SurvivalRecord],
) -> Result<Vec<SearchOutcome>> {
    let configs = sample_configs(space, base, n_configs, seed)?;
    let mut outcomes = Vec::with_capacity(configs.len());
    for (i, config) in configs.into_iter().enumerate() {
        let outcome = match train(train_bags, train_records, tune_bags, tune_records, &config) {
            Ok(output) => {
                let best = output
                    .checkpoints
                    .iter()
                    .filter_map(|c| c.smoothed_metric.map(|m| (m, c.step)))
                    .fold(None::<(f64, u64)>, |acc, (m, s)| match acc {
                        Some((bm, _)) if bm >= m => acc,
                        _ => Some((m, s)),
                    });
                match best {
                    Some((m, s)) => SearchOutcome {
                        config_index: i,
                        config,
                        best_smoothed: Some(m),
                        best_step: Some(s),
                        failure: None,
                    },
                    None => SearchOutcome {
                        config_index: i,
                        config,
                        best_smoothed: None,
                        best_step: None,
                        failure: Some(String::from(
                            "fewer evaluations than the smoothing window",
                        )),
                    },
                }
            }
            Err(e) => SearchOutcome {
                config_index: i,
                config,
                best_smoothed: None,
                best_step: None,
                failure: Some(e.to_string()),
            },
        };
        outcomes.push(outcome);
    }
    outcomes.sort_by(|a, b| match (a.best_smoothed, b.best_smoothed) {
        (Some(x), Some(y)) => y
            .partial_cmp(&x)
            .expect("non-finite metric")
            .then(a.config_index.cmp(&b.config_index)),
        (Some(_), None) => core::cmp::Ordering::Less,
        (None, Some(_)) => core::cmp::Ordering::Greater,
        (None, None) => a.config_index.cmp(&b.config_index),
    });
    Ok(outcomes)
}
