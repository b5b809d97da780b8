//! `eval`: the full evaluation-report suite for a set of case scores —
//! horizon AUC, Cox hazard-ratio tables, c-index comparisons against the
//! clinical baseline, and Kaplan-Meier risk stratification.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use survmil_core::seeds::{child_seed, stream};
use survmil_core::survival::{
    auc_at_horizon, bootstrap_ci, bootstrap_delta_ci, concordance_index, cox_fit, km_estimate,
    logrank_test, stratify_risk, ColumnEncoding, CovariateMatrix, CoxFit, DesignBuilder,
    RiskGroup, RiskThresholds, SurvivalRecord,
};
use survmil_core::synth::Split;

use crate::error::{CliError, Result};
use crate::formats::{read_cohort, read_ensemble, LoadedCohort};
use crate::manifest::{finalize_run, hash_path, RunManifest};
use crate::pipeline::{clinico_design, load_dataset, required_split, CovariateEncoding, Standardizer};

/// Resolved eval run. Exactly one of `scores_file` / `ensemble_file` is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSpec {
    pub in_dir: String,
    pub mask_dir: Option<String>,
    pub scores_file: Option<String>,
    pub ensemble_file: Option<String>,
    pub horizon_months: u32,
    pub bootstrap_samples: usize,
    pub seed: u64,
    /// Per-column overrides of the default covariate encodings.
    #[serde(default)]
    pub covariate_encodings: BTreeMap<String, CovariateEncoding>,
}

/// Case scores for the whole cohort, in cohort order.
pub(crate) fn resolve_scores(
    spec_scores: &Option<String>,
    spec_ensemble: &Option<String>,
    in_dir: &Path,
    mask_dir: Option<&Path>,
    cohort: &LoadedCohort,
) -> Result<Vec<f64>> {
    match (spec_scores, spec_ensemble) {
        (Some(path), None) => {
            let path = Path::new(path);
            let mut reader = csv::Reader::from_path(path).map_err(CliError::from)?;
            let headers = reader.headers().map_err(CliError::from)?.clone();
            let id_col = headers.iter().position(|h| h == "case_id").ok_or_else(|| {
                CliError::Invalid(format!("{}: no case_id column", path.display()))
            })?;
            let score_col = headers.iter().position(|h| h == "score").ok_or_else(|| {
                CliError::Invalid(format!("{}: no score column", path.display()))
            })?;
            let mut by_id: BTreeMap<String, f64> = BTreeMap::new();
            for record in reader.records() {
                let record = record.map_err(CliError::from)?;
                let id = record.get(id_col).unwrap_or_default().to_string();
                let score: f64 = record
                    .get(score_col)
                    .unwrap_or_default()
                    .parse()
                    .map_err(|_| {
                        CliError::Invalid(format!("{}: bad score for case {id}", path.display()))
                    })?;
                by_id.insert(id, score);
            }
            cohort
                .entries
                .iter()
                .map(|e| {
                    by_id.get(&e.case_id).copied().ok_or_else(|| {
                        CliError::Invalid(format!("{}: no score for case {}", path.display(), e.case_id))
                    })
                })
                .collect()
        }
        (None, Some(path)) => {
            let (ensemble, _) = read_ensemble(Path::new(path))?;
            let dataset = load_dataset(in_dir, cohort.clone(), mask_dir)?;
            let inferences = crate::pipeline::infer_all(&ensemble, &dataset.bags)?;
            Ok(inferences.into_iter().map(|i| i.case_score).collect())
        }
        _ => Err(CliError::Invalid(
            "exactly one of --scores and --ensemble is required".into(),
        )),
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Hazard-ratio rows of a fitted Cox model, including reference-level rows
/// for indicator columns.
fn hr_rows(fit: &CoxFit, x: &CovariateMatrix) -> Vec<[String; 5]> {
    let mut rows = Vec::new();
    let mut seen_reference: Vec<String> = Vec::new();
    for (j, name) in fit.names.iter().enumerate() {
        if let ColumnEncoding::Indicator { reference } = &x.encodings()[j] {
            // emit one reference row per covariate group
            let group = name.split('=').next().unwrap_or(name).to_string();
            let ref_label = format!("{group}={reference} (reference)");
            if reference != "0" && !seen_reference.contains(&ref_label) {
                seen_reference.push(ref_label.clone());
                rows.push([
                    ref_label,
                    String::from("1"),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
        let (lo, hi) = fit.hazard_ratio_ci(j);
        rows.push([
            name.clone(),
            fmt(fit.hazard_ratio(j)),
            fmt(lo),
            fmt(hi),
            fmt(fit.wald_p(j)),
        ]);
    }
    rows
}

pub fn run(spec: &EvalSpec, out_dir: &Path) -> Result<RunManifest> {
    super::prepare_out_dir(out_dir)?;
    let in_dir = PathBuf::from(&spec.in_dir);
    let mask_dir = spec.mask_dir.as_ref().map(PathBuf::from);
    let cohort = read_cohort(&in_dir.join("cohort.json"))?;

    let raw_scores = resolve_scores(
        &spec.scores_file,
        &spec.ensemble_file,
        &in_dir,
        mask_dir.as_deref(),
        &cohort,
    )?;

    let tune_idx = required_split(&cohort, Split::Tune)?;
    let val_splits = [Split::Val1, Split::Val2];
    for split in val_splits {
        required_split(&cohort, split)?;
    }

    // standardize on the tune split
    let tune_raw: Vec<f64> = tune_idx.iter().map(|&i| raw_scores[i]).collect();
    let standardizer = Standardizer::fit(&tune_raw)?;
    let scores = standardizer.apply_all(&raw_scores);

    // scores.csv
    {
        let path = out_dir.join("scores.csv");
        let mut w = csv::Writer::from_path(&path).map_err(CliError::from)?;
        w.write_record(["case_id", "split", "raw_score", "score"])?;
        for (i, e) in cohort.entries.iter().enumerate() {
            w.write_record([
                e.case_id.clone(),
                e.split.clone(),
                fmt(raw_scores[i]),
                fmt(scores[i]),
            ])?;
        }
        w.flush().map_err(CliError::io(&path))?;
    }

    // risk thresholds from tune
    let tune_scores: Vec<f64> = tune_idx.iter().map(|&i| scores[i]).collect();
    let thresholds = RiskThresholds::from_tune_scores(&tune_scores)?;

    // cohort-wide clinical design (consistent columns across splits)
    let all_idx: Vec<usize> = (0..cohort.n_cases()).collect();
    let clinico_all = clinico_design(&cohort, &all_idx, &spec.covariate_encodings)?;

    // tune-fitted clinical and combined Cox models for the c-index analysis;
    // columns that are not identifiable inside the tune split (constant, or
    // linearly dependent together with the constant) are excluded from these
    // two models everywhere
    let tune_identifiable = independent_columns(&clinico_all, &tune_idx);
    if tune_identifiable.is_empty() {
        return Err(CliError::Invalid(
            "no clinical covariate varies within the tune split".into(),
        ));
    }
    let clinico_fit_cols = clinico_all.select(&tune_identifiable)?;
    let tune_records: Vec<SurvivalRecord> = tune_idx.iter().map(|&i| cohort.records[i].clone()).collect();
    let clinical_fit = cox_fit(&tune_records, &clinico_fit_cols.rows_subset(&tune_idx)?)?;
    let combined_design_all = with_score_column(&clinico_fit_cols, &scores, &all_idx)?;
    let combined_fit = cox_fit(&tune_records, &combined_design_all.rows_subset(&tune_idx)?)?;

    let mut auc_writer = csv::Writer::from_path(out_dir.join("auc.csv")).map_err(CliError::from)?;
    auc_writer.write_record(["split", "n", "auc", "ci_lower", "ci_upper"])?;
    let mut cindex_writer =
        csv::Writer::from_path(out_dir.join("cindex.csv")).map_err(CliError::from)?;
    cindex_writer.write_record([
        "split",
        "model",
        "cindex",
        "ci_lower",
        "ci_upper",
        "delta_vs_clinical",
        "delta_ci_lower",
        "delta_ci_upper",
    ])?;
    let mut uni_writer =
        csv::Writer::from_path(out_dir.join("hazard_ratios_univariable.csv")).map_err(CliError::from)?;
    uni_writer.write_record(["split", "variable", "hazard_ratio", "ci_lower", "ci_upper", "p_value"])?;
    let mut multi_writer =
        csv::Writer::from_path(out_dir.join("hazard_ratios_multivariable.csv")).map_err(CliError::from)?;
    multi_writer.write_record(["split", "variable", "hazard_ratio", "ci_lower", "ci_upper", "p_value"])?;
    let mut km_writer =
        csv::Writer::from_path(out_dir.join("km_curves.csv")).map_err(CliError::from)?;
    km_writer.write_record(["split", "group", "time_months", "survival", "ci_lower", "ci_upper", "at_risk"])?;
    let mut groups_writer =
        csv::Writer::from_path(out_dir.join("risk_groups.csv")).map_err(CliError::from)?;
    groups_writer.write_record([
        "split",
        "group",
        "n",
        "events",
        "survival_at_horizon",
        "ci_lower",
        "ci_upper",
    ])?;
    let mut logrank_writer =
        csv::Writer::from_path(out_dir.join("logrank.csv")).map_err(CliError::from)?;
    logrank_writer.write_record(["split", "chi2", "p_value"])?;

    for (split_no, &split) in val_splits.iter().enumerate() {
        let idx = cohort.indices_of(split);
        let split_records: Vec<SurvivalRecord> =
            idx.iter().map(|&i| cohort.records[i].clone()).collect();
        let split_scores: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let n = idx.len();
        let boot_seed = child_seed(spec.seed, stream::BOOTSTRAP, split_no as u64);

        // ---- horizon AUC with bootstrap CI
        let auc = auc_at_horizon(&split_scores, &split_records, spec.horizon_months)?;
        let auc_ci = bootstrap_ci(n, spec.bootstrap_samples, boot_seed, |sel| {
            let s: Vec<f64> = sel.iter().map(|&i| split_scores[i]).collect();
            let r: Vec<SurvivalRecord> = sel.iter().map(|&i| split_records[i].clone()).collect();
            auc_at_horizon(&s, &r, spec.horizon_months).ok()
        })?;
        auc_writer.write_record([
            split.as_str().to_string(),
            format!("{n}"),
            fmt(auc),
            fmt(auc_ci.lower),
            fmt(auc_ci.upper),
        ])?;

        // ---- c-index: model score, tune-fitted clinical, tune-fitted combined
        let clinical_lp = clinical_fit.linear_predictor(&clinico_fit_cols.rows_subset(&idx)?)?;
        let combined_lp = combined_fit.linear_predictor(&combined_design_all.rows_subset(&idx)?)?;
        let models: [(&str, &Vec<f64>); 3] = [
            ("dls", &split_scores),
            ("clinical", &clinical_lp),
            ("clinical_plus_dls", &combined_lp),
        ];
        for (mi, (label, lp)) in models.iter().enumerate() {
            let c = concordance_index(lp, &split_records)?;
            let seed_m = child_seed(boot_seed, stream::BOOTSTRAP, 10 + mi as u64);
            let ci = bootstrap_ci(n, spec.bootstrap_samples, seed_m, |sel| {
                let s: Vec<f64> = sel.iter().map(|&i| lp[i]).collect();
                let r: Vec<SurvivalRecord> = sel.iter().map(|&i| split_records[i].clone()).collect();
                concordance_index(&s, &r).ok()
            })?;
            let delta = if *label == "clinical_plus_dls" {
                let d = c - concordance_index(&clinical_lp, &split_records)?;
                let dci = bootstrap_delta_ci(
                    n,
                    spec.bootstrap_samples,
                    child_seed(boot_seed, stream::BOOTSTRAP, 20),
                    |sel| {
                        let s: Vec<f64> = sel.iter().map(|&i| combined_lp[i]).collect();
                        let r: Vec<SurvivalRecord> =
                            sel.iter().map(|&i| split_records[i].clone()).collect();
                        concordance_index(&s, &r).ok()
                    },
                    |sel| {
                        let s: Vec<f64> = sel.iter().map(|&i| clinical_lp[i]).collect();
                        let r: Vec<SurvivalRecord> =
                            sel.iter().map(|&i| split_records[i].clone()).collect();
                        concordance_index(&s, &r).ok()
                    },
                )?;
                Some((d, dci))
            } else {
                None
            };
            cindex_writer.write_record([
                split.as_str().to_string(),
                label.to_string(),
                fmt(c),
                fmt(ci.lower),
                fmt(ci.upper),
                fmt_opt(delta.map(|d| d.0)),
                fmt_opt(delta.map(|d| d.1.lower)),
                fmt_opt(delta.map(|d| d.1.upper)),
            ])?;
        }

        // ---- univariable hazard ratios: the score, then each covariate group
        let score_design = DesignBuilder::new(n)
            .numeric("dls", &split_scores)?
            .build()?;
        let score_fit = cox_fit(&split_records, &score_design)?;
        for row in hr_rows(&score_fit, &score_design) {
            uni_writer.write_record(
                std::iter::once(split.as_str().to_string()).chain(row.into_iter()),
            )?;
        }
        let split_design = clinico_all.rows_subset(&idx)?;
        for group in covariate_groups(&clinico_all) {
            let cols: Vec<usize> = (0..clinico_all.n_cols())
                .filter(|&j| group_of(&clinico_all.names()[j]) == group)
                .collect();
            let sub = split_design.select(&cols)?;
            match cox_fit(&split_records, &sub) {
                Ok(fit) => {
                    for row in hr_rows(&fit, &sub) {
                        uni_writer.write_record(
                            std::iter::once(split.as_str().to_string()).chain(row.into_iter()),
                        )?;
                    }
                }
                // a level can be absent or separate within one split; the
                // table simply omits that group for this split
                Err(survmil_core::Error::CollinearCovariates)
                | Err(survmil_core::Error::CompleteSeparation) => {}
                Err(e) => return Err(e.into()),
            }
        }

        // ---- multivariable hazard ratios: score plus all covariates
        let multi_design = with_score_column(&clinico_all, &scores, &all_idx)?.rows_subset(&idx)?;
        match cox_fit(&split_records, &multi_design) {
            Ok(fit) => {
                for row in hr_rows(&fit, &multi_design) {
                    multi_writer.write_record(
                        std::iter::once(split.as_str().to_string()).chain(row.into_iter()),
                    )?;
                }
            }
            Err(survmil_core::Error::CollinearCovariates)
            | Err(survmil_core::Error::CompleteSeparation) => {}
            Err(e) => return Err(e.into()),
        }

        // ---- Kaplan-Meier risk groups
        let groups = stratify_risk(&split_scores, &thresholds);
        let mut group_records: BTreeMap<&'static str, Vec<SurvivalRecord>> = BTreeMap::new();
        for (g, r) in groups.iter().zip(&split_records) {
            group_records.entry(g.as_str()).or_default().push(r.clone());
        }
        for group in [RiskGroup::Low, RiskGroup::Medium, RiskGroup::High] {
            let Some(records) = group_records.get(group.as_str()) else {
                continue;
            };
            let km = km_estimate(records)?;
            for t in 0..km.event_times.len() {
                km_writer.write_record([
                    split.as_str().to_string(),
                    group.as_str().to_string(),
                    format!("{}", km.event_times[t]),
                    fmt(km.survival[t]),
                    fmt(km.ci_lower[t]),
                    fmt(km.ci_upper[t]),
                    format!("{}", km.at_risk[t]),
                ])?;
            }
            let (lo, hi) = km.ci_at(spec.horizon_months);
            groups_writer.write_record([
                split.as_str().to_string(),
                group.as_str().to_string(),
                format!("{}", records.len()),
                format!("{}", records.iter().filter(|r| r.event).count()),
                fmt(km.survival_at(spec.horizon_months)),
                fmt(lo),
                fmt(hi),
            ])?;
        }
        // high-versus-low log-rank; the row stays empty when a quartile
        // group is absent from this split
        match (group_records.get("low"), group_records.get("high")) {
            (Some(low), Some(high)) => {
                let lr = logrank_test(high, low)?;
                logrank_writer.write_record([
                    split.as_str().to_string(),
                    fmt(lr.chi2),
                    fmt(lr.p_value),
                ])?;
            }
            _ => {
                logrank_writer.write_record([
                    split.as_str().to_string(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
    }

    for (mut w, name) in [
        (auc_writer, "auc.csv"),
        (cindex_writer, "cindex.csv"),
        (uni_writer, "hazard_ratios_univariable.csv"),
        (multi_writer, "hazard_ratios_multivariable.csv"),
        (km_writer, "km_curves.csv"),
        (groups_writer, "risk_groups.csv"),
        (logrank_writer, "logrank.csv"),
    ] {
        w.flush().map_err(CliError::io(out_dir.join(name)))?;
    }

    let mut inputs = BTreeMap::new();
    inputs.insert(
        format!("{}", in_dir.join("cohort.json").display()),
        hash_path(&in_dir.join("cohort.json"))?,
    );
    if let Some(path) = &spec.scores_file {
        inputs.insert(path.clone(), hash_path(Path::new(path))?);
    }
    if let Some(path) = &spec.ensemble_file {
        inputs.insert(path.clone(), hash_path(Path::new(path))?);
        inputs.insert(
            format!("{}", in_dir.join("features").display()),
            hash_path(&in_dir.join("features"))?,
        );
    }
    if let Some(dir) = &mask_dir {
        inputs.insert(format!("{}", dir.display()), hash_path(dir)?);
    }
    let spec_json = serde_json::to_value(spec)
        .map_err(|e| CliError::Invalid(format!("spec serialization: {e}")))?;
    finalize_run(out_dir, "eval", spec_json, inputs)
}

/// Greedy rank filter over the given rows: keep columns that stay linearly
/// independent of the intercept and the previously kept columns (Gram-Schmidt
/// with a relative tolerance). A Cox model cannot identify the dropped ones.
fn independent_columns(x: &CovariateMatrix, rows: &[usize]) -> Vec<usize> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // intercept as the first basis vector
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut kept = Vec::new();
    for j in 0..x.n_cols() {
        let full = x.column(j);
        let mut v: Vec<f64> = rows.iter().map(|&i| full[i]).collect();
        let original = norm(&v).max(1.0);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let residual = norm(&v);
        if residual > 1e-8 * original {
            for vi in v.iter_mut() {
                *vi /= residual;
            }
            basis.push(v);
            kept.push(j);
        }
    }
    kept
}

fn group_of(name: &str) -> &str {
    name.split('=').next().unwrap_or(name)
}

fn covariate_groups(x: &CovariateMatrix) -> Vec<String> {
    let mut groups = Vec::new();
    for name in x.names() {
        let g = group_of(name).to_string();
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    groups
}

/// Clinical design with the standardized score prepended as `dls`.
fn with_score_column(
    clinico: &CovariateMatrix,
    scores: &[f64],
    indices: &[usize],
) -> Result<CovariateMatrix> {
    let mut names = vec!["dls".to_string()];
    names.extend(clinico.names().iter().cloned());
    let mut encodings = vec![ColumnEncoding::Numeric];
    encodings.extend(clinico.encodings().iter().cloned());
    let p = clinico.n_cols();
    let mut data = Vec::with_capacity(indices.len() * (p + 1));
    for (row, &i) in indices.iter().enumerate() {
        data.push(scores[i]);
        data.extend_from_slice(clinico.row(row));
    }
    Ok(CovariateMatrix::new(
        names,
        encodings,
        data,
        indices.len(),
        true,
    )?)
}
