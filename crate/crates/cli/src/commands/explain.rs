//! `explain`: cluster patch embeddings, quantitate cases, regress scores on
//! cluster and clinical features, and summarize per-cluster patch scores.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use survmil_core::explain::{
    clinico_regression, forward_stepwise, kmeans_fit, ols_fit, patch_cluster_scores,
    quantitate_cases, quantitation_matrix, select_k, CaseQuantitation,
};
use survmil_core::mil::{CaseBag, Ensemble, SlidePatches};
use survmil_core::seeds::{child_rng, child_seed, stream};
use survmil_core::survival::spearman;
use survmil_core::synth::Split;

use crate::error::{CliError, Result};
use crate::formats::{read_cohort, read_ensemble, write_matrix, MatrixSidecar};
use crate::manifest::{finalize_run, hash_path, RunManifest};
use crate::pipeline::{load_dataset, required_split, Standardizer};

/// Where patch embeddings come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedSource {
    /// The stored patch feature vectors.
    Raw,
    /// The best ensemble member's encoder output.
    Encoder,
}

/// Resolved explain run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainSpec {
    pub in_dir: String,
    pub mask_dir: Option<String>,
    pub scores_file: Option<String>,
    pub ensemble_file: Option<String>,
    /// Fixed cluster count; when absent, k is chosen from `k_candidates`.
    pub k: Option<usize>,
    pub k_candidates: Vec<usize>,
    /// Patch sample size for cluster fitting.
    pub sample_size: usize,
    /// Features kept by forward stepwise selection.
    pub stepwise_features: usize,
    pub embed: EmbedSource,
    pub bootstrap_samples: usize,
    pub seed: u64,
}

pub fn run(spec: &ExplainSpec, out_dir: &Path) -> Result<RunManifest> {
    super::prepare_out_dir(out_dir)?;
    let in_dir = PathBuf::from(&spec.in_dir);
    let mask_dir = spec.mask_dir.as_ref().map(PathBuf::from);
    let cohort = read_cohort(&in_dir.join("cohort.json"))?;
    let dataset = load_dataset(&in_dir, cohort, mask_dir.as_deref())?;

    let tune_idx = required_split(&dataset.cohort, Split::Tune)?;
    let train_idx = required_split(&dataset.cohort, Split::Train)?;
    let val_splits = [Split::Val1, Split::Val2];
    for split in val_splits {
        required_split(&dataset.cohort, split)?;
    }

    // scores: either a CSV or ensemble inference (which also yields patch scores)
    let ensemble: Option<Ensemble> = match &spec.ensemble_file {
        Some(path) => Some(read_ensemble(Path::new(path))?.0),
        None => None,
    };
    let (raw_scores, patch_scores): (Vec<f64>, Option<Vec<Vec<f64>>>) =
        match (&spec.scores_file, &ensemble) {
            (Some(_), None) => {
                let scores = super::eval::resolve_scores(
                    &spec.scores_file,
                    &None,
                    &in_dir,
                    mask_dir.as_deref(),
                    &dataset.cohort,
                )?;
                (scores, None)
            }
            (None, Some(ens)) => {
                let inferences = crate::pipeline::infer_all(ens, &dataset.bags)?;
                let scores = inferences.iter().map(|i| i.case_score).collect();
                let patches = inferences.into_iter().map(|i| i.patch_scores).collect();
                (scores, Some(patches))
            }
            _ => {
                return Err(CliError::Invalid(
                    "exactly one of --scores and --ensemble is required".into(),
                ))
            }
        };

    // standardize scores on the tune split
    let tune_raw: Vec<f64> = tune_idx.iter().map(|&i| raw_scores[i]).collect();
    let standardizer = Standardizer::fit(&tune_raw)?;
    let scores = standardizer.apply_all(&raw_scores);

    // embedding view of every bag
    let embedded: Vec<CaseBag> = match spec.embed {
        EmbedSource::Raw => dataset.bags.clone(),
        EmbedSource::Encoder => {
            let Some(ens) = &ensemble else {
                return Err(CliError::Invalid(
                    "--embed encoder needs --ensemble".into(),
                ));
            };
            let encoder = &ens.members[0].model;
            dataset
                .bags
                .iter()
                .map(|bag| embed_bag(bag, encoder))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let dim = embedded
        .iter()
        .map(|b| b.feature_dim)
        .next()
        .ok_or_else(|| CliError::Invalid("no cases".into()))?;

    // training-split patch sample
    let train_sample = sample_train_patches(&embedded, &train_idx, spec.sample_size, dim, spec.seed);
    let n_sample = train_sample.len() / dim;
    if n_sample == 0 {
        return Err(CliError::Invalid("no training patches to cluster".into()));
    }

    // cluster count
    let tune_bags: Vec<CaseBag> = tune_idx.iter().map(|&i| embedded[i].clone()).collect();
    let tune_scores: Vec<f64> = tune_idx.iter().map(|&i| scores[i]).collect();
    let k = match spec.k {
        Some(k) => k,
        None => {
            let candidates: Vec<usize> = spec
                .k_candidates
                .iter()
                .copied()
                .filter(|&k| k <= n_sample)
                .collect();
            if candidates.is_empty() {
                return Err(CliError::Invalid(format!(
                    "no k candidate fits the sample of {n_sample} patches"
                )));
            }
            let selection = select_k(
                &candidates,
                &train_sample,
                dim,
                &tune_bags,
                &tune_scores,
                spec.stepwise_features,
                spec.seed,
            )?;
            let path = out_dir.join("k_selection.csv");
            let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
            w.write_record(["k", "tune_adjusted_r2", "chosen"])?;
            for r in &selection.results {
                w.write_record([
                    format!("{}", r.k),
                    format!("{}", r.adjusted_r2),
                    format!("{}", (r.k == selection.chosen_k) as u8),
                ])?;
            }
            w.flush().map_err(CliError::io(&path))?;
            selection.chosen_k
        }
    };

    // fit the cluster model and persist the centroids
    let model = kmeans_fit(&train_sample, dim, k, spec.seed)?;
    write_matrix(
        &out_dir.join("clusters"),
        &MatrixSidecar {
            case_id: String::from("clusters"),
            slide_id: String::new(),
            rows: model.k,
            feature_dim: model.dim,
            coords: Vec::new(),
        },
        &model.centroids,
    )?;

    // quantitations for every case
    let quants = quantitate_cases(&model, &embedded)?;
    write_quantitations(out_dir, &dataset, &quants)?;

    // stepwise selection on the tune split
    let tune_quants: Vec<CaseQuantitation> =
        tune_idx.iter().map(|&i| quants[i].clone()).collect();
    let tune_features = quantitation_matrix(&tune_quants, false)?;
    let stepwise = forward_stepwise(&tune_features, &tune_scores, spec.stepwise_features.min(k))?;
    {
        let path = out_dir.join("stepwise.csv");
        let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
        w.write_record(["rank", "feature", "tune_adjusted_r2"])?;
        for (rank, step) in stepwise.path.iter().enumerate() {
            w.write_record([
                format!("{}", rank + 1),
                tune_features.names()[step.feature].clone(),
                format!("{}", step.adjusted_r2),
            ])?;
        }
        w.flush().map_err(CliError::io(&path))?;
    }

    // per-split regressions: selected clusters, full-k clusters, clinical
    let mut clusters_writer =
        csv::Writer::from_path(out_dir.join("regression_clusters.csv")).map_err(CliError::from)?;
    clusters_writer.write_record([
        "split",
        "selection_rank",
        "feature",
        "coefficient",
        "std_error",
        "p_value",
        "adjusted_r2_selected",
        "adjusted_r2_full",
    ])?;
    let mut clinico_writer =
        csv::Writer::from_path(out_dir.join("regression_clinico.csv")).map_err(CliError::from)?;
    clinico_writer.write_record([
        "split",
        "feature",
        "coefficient",
        "std_error",
        "p_value",
        "adjusted_r2",
    ])?;

    for &split in &val_splits {
        let idx = dataset.cohort.indices_of(split);
        let split_scores: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let split_quants: Vec<CaseQuantitation> = idx.iter().map(|&i| quants[i].clone()).collect();

        let features = quantitation_matrix(&split_quants, false)?;
        let selected = features.select(&stepwise.order)?;
        let fit = ols_fit(&selected, &split_scores)?;
        let full = quantitation_matrix(&split_quants, true)
            .and_then(|m| Ok(ols_fit(&m, &split_scores)?));
        let full_r2 = full.as_ref().map(|f| f.adjusted_r2).ok();
        for (rank, j) in (0..fit.names.len()).enumerate() {
            clusters_writer.write_record([
                split.as_str().to_string(),
                format!("{}", rank + 1),
                fit.names[j].clone(),
                format!("{}", fit.coefficients[j]),
                format!("{}", fit.std_errors[j]),
                format!("{}", fit.p_values[j]),
                format!("{}", fit.adjusted_r2),
                full_r2.map(|v| format!("{v}")).unwrap_or_default(),
            ])?;
        }
        clusters_writer.write_record([
            split.as_str().to_string(),
            String::new(),
            "(intercept)".to_string(),
            format!("{}", fit.intercept),
            format!("{}", fit.intercept_std_error),
            format!("{}", fit.intercept_p),
            format!("{}", fit.adjusted_r2),
            full_r2.map(|v| format!("{v}")).unwrap_or_default(),
        ])?;

        let clinico = crate::pipeline::clinico_design(&dataset.cohort, &idx, &BTreeMap::new())?;
        let cfit = clinico_regression(&clinico, &split_scores)?;
        for j in 0..cfit.names.len() {
            clinico_writer.write_record([
                split.as_str().to_string(),
                cfit.names[j].clone(),
                format!("{}", cfit.coefficients[j]),
                format!("{}", cfit.std_errors[j]),
                format!("{}", cfit.p_values[j]),
                format!("{}", cfit.adjusted_r2),
            ])?;
        }
        clinico_writer.write_record([
            split.as_str().to_string(),
            "(intercept)".to_string(),
            format!("{}", cfit.intercept),
            format!("{}", cfit.intercept_std_error),
            format!("{}", cfit.intercept_p),
            format!("{}", cfit.adjusted_r2),
        ])?;
    }
    clusters_writer
        .flush()
        .map_err(CliError::io(out_dir.join("regression_clusters.csv")))?;
    clinico_writer
        .flush()
        .map_err(CliError::io(out_dir.join("regression_clinico.csv")))?;

    // patch-level cluster scores on the first validation split (the
    // ensemble-averaged, member-standardized patch scores)
    if let Some(patch_scores) = &patch_scores {
        let idx = dataset.cohort.indices_of(Split::Val1);
        let mut values = Vec::new();
        let mut cluster_ids = Vec::new();
        let mut slide_ids = Vec::new();
        for &i in &idx {
            let bag = &embedded[i];
            let mut flat = Vec::with_capacity(bag.total_patches() * dim);
            for p in bag.patches() {
                flat.extend_from_slice(p);
            }
            let ids = survmil_core::explain::assign(&model, &flat, dim)?;
            for (pi, &cid) in ids.iter().enumerate() {
                values.push(patch_scores[i][pi]);
                cluster_ids.push(cid);
                slide_ids.push(bag.slide_of(pi).to_string());
            }
        }
        let summary = patch_cluster_scores(
            &values,
            &cluster_ids,
            &slide_ids,
            k,
            spec.bootstrap_samples,
            child_seed(spec.seed, stream::CLUSTER_SCORES, 0),
        )?;
        let path = out_dir.join("cluster_scores.csv");
        let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
        w.write_record([
            "cluster",
            "n_patches",
            "mean_score",
            "ci_lower",
            "ci_upper",
            "iqr_lower",
            "iqr_upper",
        ])?;
        let mut rows = summary.clusters.clone();
        rows.sort_by(|a, b| b.mean.partial_cmp(&a.mean).expect("finite means"));
        for c in &rows {
            w.write_record([
                format!("cluster_{}", c.cluster),
                format!("{}", c.n_patches),
                format!("{}", c.mean),
                format!("{}", c.ci_lower),
                format!("{}", c.ci_upper),
                format!("{}", c.iqr_lower),
                format!("{}", c.iqr_upper),
            ])?;
        }
        for &c in &summary.empty_clusters {
            w.write_record([
                format!("cluster_{c}"),
                "0".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        w.flush().map_err(CliError::io(&path))?;
    }

    // rank correlations between scores and raw covariates, per split
    {
        let path = out_dir.join("spearman.csv");
        let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
        w.write_record(["split", "covariate", "rho", "p_value"])?;
        for &split in &val_splits {
            let idx = dataset.cohort.indices_of(split);
            let split_scores: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            for name in dataset.cohort.covariate_names() {
                let col = dataset.cohort.covariate_column(&name, &idx)?;
                match spearman(&col, &split_scores) {
                    Ok(r) => {
                        w.write_record([
                            split.as_str().to_string(),
                            name.clone(),
                            format!("{}", r.rho),
                            format!("{}", r.p_value),
                        ])?;
                    }
                    Err(survmil_core::Error::ZeroRankVariance) => {
                        w.write_record([
                            split.as_str().to_string(),
                            name.clone(),
                            String::new(),
                            String::new(),
                        ])?;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        w.flush().map_err(CliError::io(&path))?;
    }

    let mut inputs = BTreeMap::new();
    inputs.insert(
        format!("{}", in_dir.join("cohort.json").display()),
        hash_path(&in_dir.join("cohort.json"))?,
    );
    inputs.insert(
        format!("{}", in_dir.join("features").display()),
        hash_path(&in_dir.join("features"))?,
    );
    if let Some(path) = &spec.scores_file {
        inputs.insert(path.clone(), hash_path(Path::new(path))?);
    }
    if let Some(path) = &spec.ensemble_file {
        inputs.insert(path.clone(), hash_path(Path::new(path))?);
    }
    if let Some(dir) = &mask_dir {
        inputs.insert(format!("{}", dir.display()), hash_path(dir)?);
    }
    let spec_json = serde_json::to_value(spec)
        .map_err(|e| CliError::Invalid(format!("spec serialization: {e}")))?;
    finalize_run(out_dir, "explain", spec_json, inputs)
}

/// Replace each patch's features with its encoder embedding.
fn embed_bag(bag: &CaseBag, model: &survmil_core::mil::MilModel) -> Result<CaseBag> {
    let out_dim = model.shape().embedding_dim();
    let mut slides = Vec::with_capacity(bag.slides.len());
    for s in &bag.slides {
        let mut features = Vec::with_capacity(s.n_patches() * out_dim);
        for i in 0..s.n_patches() {
            features.extend_from_slice(&model.embed(s.patch(i))?);
        }
        slides.push(SlidePatches::new(
            s.slide_id.clone(),
            out_dim,
            features,
            s.coords().to_vec(),
        )?);
    }
    Ok(CaseBag::new(bag.case_id.clone(), out_dim, slides)?)
}

/// Up to `sample_size` training patches, sampled without replacement under a
/// derived seed (all patches when fewer exist).
fn sample_train_patches(
    bags: &[CaseBag],
    train_idx: &[usize],
    sample_size: usize,
    dim: usize,
    seed: u64,
) -> Vec<f64> {
    let mut refs: Vec<&[f64]> = Vec::new();
    for &i in train_idx {
        refs.extend(bags[i].patches());
    }
    let mut out = Vec::new();
    if refs.len() <= sample_size {
        for p in refs {
            out.extend_from_slice(p);
        }
        return out;
    }
    let mut rng = child_rng(seed, stream::KMEANS, u64::MAX);
    let chosen = rand::seq::index::sample(&mut rng, refs.len(), sample_size);
    let mut indices: Vec<usize> = chosen.into_iter().collect();
    indices.sort_unstable();
    out.reserve(indices.len() * dim);
    for i in indices {
        out.extend_from_slice(refs[i]);
    }
    out
}

fn write_quantitations(
    out_dir: &Path,
    dataset: &crate::pipeline::Dataset,
    quants: &[CaseQuantitation],
) -> Result<()> {
    let path = out_dir.join("quantitation.csv");
    let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
    let k = quants.first().map(|q| q.percentages.len()).unwrap_or(0);
    let mut header = vec!["case_id".to_string(), "split".to_string()];
    header.extend((0..k).map(|j| format!("cluster_{j}")));
    w.write_record(&header)?;
    for (i, q) in quants.iter().enumerate() {
        let mut row = vec![q.case_id.clone(), dataset.cohort.entries[i].split.clone()];
        row.extend(q.percentages.iter().map(|p| format!("{p}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(CliError::io(&path))
}
