//! Clustering-derived features and score explanation.
//!
//! Patch embeddings are clustered with k-means; each case is then described
//! by the percentage of its patches falling in every cluster, and those
//! quantitations explain the model's case scores through linear regression
//! and forward stepwise selection.

mod cluster_scores;
mod kmeans;
mod regression;

pub use cluster_scores::{patch_cluster_scores, ClusterScore, PatchClusterScores};
pub use kmeans::{assign, kmeans_fit, ClusterModel, KMEANS_MAX_ITERS};
pub use regression::{
    clinico_regression, forward_stepwise, ols_fit, OlsFit, StepwiseResult, StepwiseStep,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mil::CaseBag;
use crate::survival::{ColumnEncoding, CovariateMatrix};

/// Cluster counts explored when choosing k.
pub const DEFAULT_K_CANDIDATES: [usize; 8] = [10, 25, 50, 100, 200, 300, 400, 500];
/// Number of features kept by stepwise selection.
pub const DEFAULT_STEPWISE_FEATURES: usize = 10;
/// Embedding sample size for cluster fitting.
pub const DEFAULT_FIT_SAMPLE_SIZE: usize = 100_000;

/// Per-case cluster composition, in percent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseQuantitation {
    pub case_id: String,
    /// Percentage of the case's patches in each cluster; sums to 100.
    pub percentages: Vec<f64>,
}

/// Percentage of patches per cluster for one case.
pub fn quantitate(case_id: &str, assignments: &[usize], k: usize) -> Result<CaseQuantitation> {
    if assignments.is_empty() {
        return Err(Error::EmptyInput("patch assignments"));
    }
    let mut counts = alloc::vec![0usize; k];
    for &a in assignments {
        if a >= k {
            return Err(Error::InvalidArgument(format!(
                "cluster id {a} out of range for k={k}"
            )));
        }
        counts[a] += 1;
    }
    let total = assignments.len() as f64;
    Ok(CaseQuantitation {
        case_id: String::from(case_id),
        percentages: counts.iter().map(|&c| 100.0 * c as f64 / total).collect(),
    })
}

/// Stack quantitations into a feature matrix with one `cluster_<j>` column
/// per cluster. Because percentages sum to 100, a full-k matrix is collinear
/// with an intercept; `drop_reference` removes the last cluster column for
/// full-model regressions.
pub fn quantitation_matrix(
    quants: &[CaseQuantitation],
    drop_reference: bool,
) -> Result<CovariateMatrix> {
    if quants.is_empty() {
        return Err(Error::EmptyInput("quantitations"));
    }
    let k = quants[0].percentages.len();
    for q in quants {
        if q.percentages.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                got: q.percentages.len(),
            });
        }
    }
    let cols = if drop_reference { k - 1 } else { k };
    let mut names = Vec::with_capacity(cols);
    let mut encodings = Vec::with_capacity(cols);
    for j in 0..cols {
        names.push(format!("cluster_{j}"));
        encodings.push(ColumnEncoding::Numeric);
    }
    let mut data = Vec::with_capacity(quants.len() * cols);
    for q in quants {
        data.extend_from_slice(&q.percentages[..cols]);
    }
    // constant (all-zero) columns are expected for clusters absent from a
    // split; regressions skip or reject them downstream
    CovariateMatrix::new(names, encodings, data, quants.len(), true)
}

/// Quantitate every case of a split under a cluster model.
pub fn quantitate_cases(model: &ClusterModel, bags: &[CaseBag]) -> Result<Vec<CaseQuantitation>> {
    let mut out = Vec::with_capacity(bags.len());
    for bag in bags {
        let mut flat = Vec::with_capacity(bag.total_patches() * bag.feature_dim);
        for p in bag.patches() {
            flat.extend_from_slice(p);
        }
        if flat.is_empty() {
            return Err(Error::EmptyRoi);
        }
        let ids = assign(model, &flat, bag.feature_dim)?;
        out.push(quantitate(&bag.case_id, &ids, model.k)?);
    }
    Ok(out)
}

/// Adjusted R² achieved by one candidate cluster count.
#[derive(Debug, Clone, PartialEq)]
pub struct KCandidateResult {
    pub k: usize,
    /// Adjusted R² of the best `n_select`-feature stepwise fit on the tune
    /// split.
    pub adjusted_r2: f64,
}

/// Outcome of the cluster-count selection.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub chosen_k: usize,
    pub results: Vec<KCandidateResult>,
}

/// Choose the cluster count: for each candidate k, fit clusters on the
/// training sample, quantitate the tune cases, run forward stepwise
/// selection of `n_select` features against the tune scores, and keep the k
/// with the highest adjusted R² (ties to the smaller k). Deterministic per
/// seed.
pub fn select_k(
    candidates: &[usize],
    train_sample: &[f64],
    dim: usize,
    tune_bags: &[CaseBag],
    tune_scores: &[f64],
    n_select: usize,
    seed: u64,
) -> Result<KSelection> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("k candidates"));
    }
    if tune_bags.len() != tune_scores.len() {
        return Err(Error::LengthMismatch {
            expected: tune_bags.len(),
            got: tune_scores.len(),
        });
    }
    let mut results = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let model = kmeans_fit(train_sample, dim, k, seed)?;
        let quants = quantitate_cases(&model, tune_bags)?;
        let features = quantitation_matrix(&quants, false)?;
        let stepwise = forward_stepwise(&features, tune_scores, n_select.min(k))?;
        results.push(KCandidateResult {
            k,
            adjusted_r2: stepwise.fit.adjusted_r2,
        });
    }
    let mut chosen = &results[0];
    for r in &results[1..] {
        if r.adjusted_r2 > chosen.adjusted_r2 {
            chosen = r;
        }
    }
    Ok(KSelection {
        chosen_k: chosen.k,
        results,
    })
}
