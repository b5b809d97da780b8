//! `survmil` — synthetic-cohort survival modeling pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use survmil_cli::commands::{self, eval, explain, generate, mask, replay, search, train};
use survmil_cli::error::{CliError, Result};
use survmil_cli::pipeline::CovariateEncoding;
use survmil_core::explain::{DEFAULT_FIT_SAMPLE_SIZE, DEFAULT_K_CANDIDATES, DEFAULT_STEPWISE_FEATURES};
use survmil_core::mil::{SearchSpace, TrainConfig, DEFAULT_ENSEMBLE_SIZE};
use survmil_core::survival::DEFAULT_BOOTSTRAP_SAMPLES;
use survmil_core::synth::GeneratorConfig;

#[derive(Parser)]
#[command(
    name = "survmil",
    version,
    about = "Weakly-supervised survival modeling on synthetic or user-supplied cohorts",
    long_about = "Generates synthetic cohorts with planted prognostic structure, builds ROI \
                  masks from probability heatmaps, trains the multiple-instance survival \
                  model, evaluates risk scores, and explains them through clustering-derived \
                  features. Every command writes a run manifest with content hashes; `replay` \
                  re-executes a manifest and verifies byte-identical outputs."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for the run (must not already hold a manifest).
    #[arg(long, global = true, default_value = "run")]
    out_dir: PathBuf,
    /// Root seed of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads where a command parallelizes.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// JSON config file merged over the command's defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort: survival records, patch features,
    /// heatmaps, reference masks, and hidden ground truth.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of cases (overrides the config file).
        #[arg(long)]
        n_cases: Option<usize>,
    },
    /// Build binary ROI masks from heatmaps and report segmentation metrics.
    Mask {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory produced by `generate` (needs cohort.json + heatmaps/).
        #[arg(long)]
        in_dir: PathBuf,
        /// Fixed binarization threshold in (0,1).
        #[arg(long)]
        threshold: Option<f32>,
        /// Resolve the threshold from this tune-split recall target.
        #[arg(long)]
        recall_target: Option<f64>,
        /// Reference masks for resolution and metrics.
        #[arg(long)]
        truth_dir: Option<PathBuf>,
        /// Dilation radius in superpixels.
        #[arg(long, default_value_t = 0)]
        dilation: usize,
        /// Minimum connected-component size kept.
        #[arg(long, default_value_t = survmil_core::mask::DEFAULT_MIN_COMPONENT)]
        min_component: usize,
    },
    /// Train model replicas and ensemble the best by tune c-index.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        in_dir: PathBuf,
        /// Gate patches by the masks in this directory.
        #[arg(long)]
        mask_dir: Option<PathBuf>,
        /// Model replicas to train.
        #[arg(long, default_value_t = DEFAULT_ENSEMBLE_SIZE)]
        models: usize,
        /// Ensemble members kept.
        #[arg(long, default_value_t = DEFAULT_ENSEMBLE_SIZE)]
        ensemble_size: usize,
        /// Total optimization steps (overrides the config file).
        #[arg(long)]
        steps: Option<u64>,
        /// Continue a single model from a snapshot.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Random hyperparameter search ranked by smoothed tune c-index.
    Search {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        in_dir: PathBuf,
        #[arg(long)]
        mask_dir: Option<PathBuf>,
        /// Configurations to sample.
        #[arg(long, default_value_t = 100)]
        configs: usize,
        /// Total optimization steps per configuration.
        #[arg(long)]
        steps: Option<u64>,
        /// JSON file with the candidate-value space.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Evaluation reports: horizon AUC, hazard ratios, c-index deltas, and
    /// Kaplan-Meier risk groups.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        in_dir: PathBuf,
        #[arg(long)]
        mask_dir: Option<PathBuf>,
        /// CSV of case scores (columns case_id, score).
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Trained ensemble to run inference with.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// AUC horizon in months.
        #[arg(long, default_value_t = survmil_core::survival::DEFAULT_HORIZON_MONTHS)]
        horizon: u32,
        /// Bootstrap replicates for confidence intervals.
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_SAMPLES)]
        bootstrap_samples: usize,
    },
    /// Cluster-based explanation: quantitations, regressions, stepwise
    /// selection, patch-level cluster scores, and rank correlations.
    Explain {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        in_dir: PathBuf,
        #[arg(long)]
        mask_dir: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Fixed cluster count.
        #[arg(long)]
        k: Option<usize>,
        /// Choose k from the candidate list by tune-split fit.
        #[arg(long, default_value_t = false)]
        select_k: bool,
        /// Patch sample size for cluster fitting.
        #[arg(long, default_value_t = DEFAULT_FIT_SAMPLE_SIZE)]
        sample_size: usize,
        /// Features kept by stepwise selection.
        #[arg(long, default_value_t = DEFAULT_STEPWISE_FEATURES)]
        stepwise: usize,
        /// Embedding source: raw | encoder.
        #[arg(long, default_value = "raw")]
        embed: String,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_SAMPLES)]
        bootstrap_samples: usize,
    },
    /// Re-run a recorded manifest and verify byte-identical outputs.
    Replay {
        /// Path to a manifest.json from a previous run.
        manifest: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Merge a JSON config file (if any) over a serde-default-able config type.
fn load_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            serde_json::from_str(&raw).map_err(CliError::json(path))
        }
    }
}

fn path_string(path: &PathBuf) -> String {
    path.to_string_lossy().into_owned()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, n_cases } => {
            let mut config: GeneratorConfig = load_config(&common.config)?;
            config.seed = common.seed;
            if let Some(n) = n_cases {
                config.n_cases = n;
            }
            generate::run(&generate::GenerateSpec { config }, &common.out_dir)?;
        }
        Command::Mask {
            common,
            in_dir,
            threshold,
            recall_target,
            truth_dir,
            dilation,
            min_component,
        } => {
            let spec = mask::MaskSpec {
                in_dir: path_string(&in_dir),
                truth_dir: truth_dir.as_ref().map(path_string),
                threshold,
                recall_target,
                dilation,
                min_component,
            };
            mask::run(&spec, &common.out_dir)?;
        }
        Command::Train {
            common,
            in_dir,
            mask_dir,
            models,
            ensemble_size,
            steps,
            resume,
        } => {
            let mut config: TrainConfig = load_config(&common.config)?;
            config.seed = common.seed;
            if let Some(steps) = steps {
                config.total_steps = steps;
            }
            let spec = train::TrainSpec {
                in_dir: path_string(&in_dir),
                mask_dir: mask_dir.as_ref().map(path_string),
                config,
                models,
                ensemble_size,
                resume: resume.as_ref().map(path_string),
                threads: common.threads,
            };
            train::run(&spec, &common.out_dir)?;
        }
        Command::Search {
            common,
            in_dir,
            mask_dir,
            configs,
            steps,
            space,
        } => {
            let mut base: TrainConfig = load_config(&common.config)?;
            base.seed = common.seed;
            if let Some(steps) = steps {
                base.total_steps = steps;
            }
            let space: SearchSpace = load_config(&space)?;
            let spec = search::SearchSpec {
                in_dir: path_string(&in_dir),
                mask_dir: mask_dir.as_ref().map(path_string),
                base,
                space,
                n_configs: configs,
                seed: common.seed,
            };
            search::run(&spec, &common.out_dir)?;
        }
        Command::Eval {
            common,
            in_dir,
            mask_dir,
            scores,
            ensemble,
            horizon,
            bootstrap_samples,
        } => {
            let encodings: BTreeMap<String, CovariateEncoding> = load_config(&common.config)?;
            let spec = eval::EvalSpec {
                in_dir: path_string(&in_dir),
                mask_dir: mask_dir.as_ref().map(path_string),
                scores_file: scores.as_ref().map(path_string),
                ensemble_file: ensemble.as_ref().map(path_string),
                horizon_months: horizon,
                bootstrap_samples,
                seed: common.seed,
                covariate_encodings: encodings,
            };
            eval::run(&spec, &common.out_dir)?;
        }
        Command::Explain {
            common,
            in_dir,
            mask_dir,
            scores,
            ensemble,
            k,
            select_k,
            sample_size,
            stepwise,
            embed,
            bootstrap_samples,
        } => {
            let embed = match embed.as_str() {
                "raw" => explain::EmbedSource::Raw,
                "encoder" => explain::EmbedSource::Encoder,
                other => {
                    return Err(CliError::Invalid(format!(
                        "unknown embedding source {other} (expected raw or encoder)"
                    )))
                }
            };
            if k.is_none() && !select_k {
                return Err(CliError::Invalid(
                    "either --k or --select-k is required".into(),
                ));
            }
            if k.is_some() && select_k {
                return Err(CliError::Invalid(
                    "--k and --select-k are mutually exclusive".into(),
                ));
            }
            let spec = explain::ExplainSpec {
                in_dir: path_string(&in_dir),
                mask_dir: mask_dir.as_ref().map(path_string),
                scores_file: scores.as_ref().map(path_string),
                ensemble_file: ensemble.as_ref().map(path_string),
                k,
                k_candidates: DEFAULT_K_CANDIDATES.to_vec(),
                sample_size,
                stepwise_features: stepwise,
                embed,
                bootstrap_samples,
                seed: common.seed,
            };
            explain::run(&spec, &common.out_dir)?;
        }
        Command::Replay { manifest, common } => {
            commands::prepare_out_dir(&common.out_dir)?;
            // prepare_out_dir is re-checked inside the dispatched command;
            // remove the placeholder dir so the command can create it fresh
            let _ = std::fs::remove_dir(&common.out_dir);
            replay::run(&manifest, &common.out_dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
