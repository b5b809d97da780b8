//! Shared plumbing between commands: dataset loading, mask gating, scoring,
//! standardization, and covariate design construction.

use std::collections::BTreeMap;
use std::path::Path;

use survmil_core::explain::OlsFit;
use survmil_core::mask::{patch_inclusion, DEFAULT_PATCH_SIDE};
use survmil_core::mil::{gate_case, infer_case, CaseBag, CaseInference, Ensemble, SlidePatches};
use survmil_core::survival::{CovariateMatrix, DesignBuilder};
use survmil_core::synth::Split;

use crate::error::{CliError, Result};
use crate::formats::{list_sidecars, read_mask, read_matrix, LoadedCohort};

/// Cohort records plus per-case patch bags, aligned to cohort order.
pub struct Dataset {
    pub cohort: LoadedCohort,
    pub bags: Vec<CaseBag>,
}

/// Load the feature matrices under `<in_dir>/features`, group them into
/// per-case bags aligned with the cohort, and optionally gate patches by the
/// masks in `mask_dir` (slides without a mask file keep no patches).
pub fn load_dataset(in_dir: &Path, cohort: LoadedCohort, mask_dir: Option<&Path>) -> Result<Dataset> {
    let features_dir = in_dir.join("features");
    let stems = list_sidecars(&features_dir)?;
    if stems.is_empty() {
        return Err(CliError::Invalid(format!(
            "no feature matrices under {}",
            features_dir.display()
        )));
    }
    let mut by_case: BTreeMap<String, Vec<SlidePatches>> = BTreeMap::new();
    let mut feature_dim = None;
    for stem in &stems {
        let (sidecar, data) = read_matrix(stem)?;
        let dim = *feature_dim.get_or_insert(sidecar.feature_dim);
        if sidecar.feature_dim != dim {
            return Err(CliError::Invalid(format!(
                "{}: feature_dim {} differs from {}",
                stem.display(),
                sidecar.feature_dim,
                dim
            )));
        }
        let slide = SlidePatches::new(
            sidecar.slide_id.clone(),
            sidecar.feature_dim,
            data,
            sidecar.coords.clone(),
        )?;
        by_case.entry(sidecar.case_id.clone()).or_default().push(slide);
    }
    let dim = feature_dim.expect("nonempty stems");

    let mut bags = Vec::with_capacity(cohort.n_cases());
    for entry in &cohort.entries {
        let slides = by_case.remove(&entry.case_id).unwrap_or_default();
        let mut bag = CaseBag::new(entry.case_id.clone(), dim, slides)?;
        if let Some(mask_dir) = mask_dir {
            let mut included = Vec::new();
            for s in &bag.slides {
                let stem = mask_dir.join(&s.slide_id);
                if stem.with_extension("json").exists() {
                    let mask = read_mask(&stem)?;
                    included.push((s.slide_id.clone(), patch_inclusion(&mask, DEFAULT_PATCH_SIDE)?));
                }
            }
            bag = gate_case(&bag, &included)?;
        }
        bags.push(bag);
    }
    Ok(Dataset { cohort, bags })
}

impl Dataset {
    pub fn feature_dim(&self) -> usize {
        self.bags.iter().map(|b| b.feature_dim).next().unwrap_or(0)
    }

    pub fn bags_for(&self, indices: &[usize]) -> Vec<CaseBag> {
        indices.iter().map(|&i| self.bags[i].clone()).collect()
    }

    pub fn records_for(&self, indices: &[usize]) -> Vec<survmil_core::survival::SurvivalRecord> {
        indices.iter().map(|&i| self.cohort.records[i].clone()).collect()
    }
}

/// Exhaustive ensemble inference over every case, in cohort order.
pub fn infer_all(ensemble: &Ensemble, bags: &[CaseBag]) -> Result<Vec<CaseInference>> {
    bags.iter()
        .map(|b| infer_case(ensemble, b).map_err(CliError::from))
        .collect()
}

/// Mean/std standardization fitted on one slice of scores.
#[derive(Debug, Clone, Copy)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    /// Population statistics; errors on an empty or constant slice.
    pub fn fit(scores: &[f64]) -> Result<Standardizer> {
        if scores.is_empty() {
            return Err(CliError::Invalid("no scores to standardize".into()));
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        if var == 0.0 {
            return Err(CliError::Invalid("constant scores cannot be standardized".into()));
        }
        Ok(Standardizer {
            mean,
            std: var.sqrt(),
        })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn apply_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }
}

/// How a raw covariate column enters a design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateEncoding {
    Numeric,
    AgeDecades,
    Indicator,
    Categorical,
    Drop,
}

/// Default encoding rules: a column named `age` enters as centered decades;
/// 0/1 columns as indicators; small-integer columns with at most 10 levels
/// as categorical; anything else as numeric.
pub fn default_encoding(name: &str, values: &[f64]) -> CovariateEncoding {
    if name == "age" {
        return CovariateEncoding::AgeDecades;
    }
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let all_small_ints = distinct
        .iter()
        .all(|v| v.fract() == 0.0 && (0.0..=100.0).contains(v));
    if all_small_ints && distinct.len() <= 2 && distinct.iter().all(|v| *v == 0.0 || *v == 1.0) {
        CovariateEncoding::Indicator
    } else if all_small_ints && distinct.len() <= 10 {
        CovariateEncoding::Categorical
    } else {
        CovariateEncoding::Numeric
    }
}

/// Standard clinicopathologic design over the given cases, using default
/// encodings with optional per-column overrides.
pub fn clinico_design(
    cohort: &LoadedCohort,
    indices: &[usize],
    overrides: &BTreeMap<String, CovariateEncoding>,
) -> Result<CovariateMatrix> {
    let mut builder = DesignBuilder::new(indices.len());
    for name in cohort.covariate_names() {
        let values = cohort.covariate_column(&name, indices)?;
        let encoding = overrides
            .get(&name)
            .copied()
            .unwrap_or_else(|| default_encoding(&name, &values));
        builder = match encoding {
            CovariateEncoding::Numeric => builder.numeric(&name, &values)?,
            CovariateEncoding::AgeDecades => builder.age_decades(&name, &values)?,
            CovariateEncoding::Indicator => builder.indicator(&name, &values)?,
            CovariateEncoding::Categorical => {
                let labels: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
                builder.categorical(&name, &labels)?
            }
            CovariateEncoding::Drop => builder,
        };
    }
    Ok(builder.build()?)
}

/// Case indices per split, erroring when a required split is empty.
pub fn required_split(cohort: &LoadedCohort, split: Split) -> Result<Vec<usize>> {
    let idx = cohort.indices_of(split);
    if idx.is_empty() {
        return Err(CliError::Invalid(format!(
            "cohort has no cases in split {}",
            split.as_str()
        )));
    }
    Ok(idx)
}

/// Format an OLS fit as CSV rows: `(feature, coefficient, std_error, p)`.
pub fn ols_rows(fit: &OlsFit) -> Vec<(String, f64, f64, f64)> {
    let mut rows = Vec::with_capacity(fit.names.len() + 1);
    for j in 0..fit.names.len() {
        rows.push((
            fit.names[j].clone(),
            fit.coefficients[j],
            fit.std_errors[j],
            fit.p_values[j],
        ));
    }
    rows.push((
        "(intercept)".into(),
        fit.intercept,
        fit.intercept_std_error,
        fit.intercept_p,
    ));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_encodings() {
        assert_eq!(default_encoding("age", &[60.0, 70.0]), CovariateEncoding::AgeDecades);
        assert_eq!(default_encoding("female", &[0.0, 1.0, 0.0]), CovariateEncoding::Indicator);
        assert_eq!(default_encoding("grade", &[1.0, 2.0, 3.0]), CovariateEncoding::Categorical);
        assert_eq!(default_encoding("score", &[0.2, 1.7]), CovariateEncoding::Numeric);
    }

    #[test]
    fn standardizer_round_trip() {
        let s = Standardizer::fit(&[1.0, 2.0, 3.0]).unwrap();
        let out = s.apply_all(&[1.0, 2.0, 3.0]);
        assert!((out[1]).abs() < 1e-12);
        assert!((out.iter().sum::<f64>()).abs() < 1e-12);
        assert!(Standardizer::fit(&[2.0, 2.0]).is_err());
    }
}
