//! Top-k ensembling and exhaustive inference.

use alloc::vec::Vec;

use super::bag::CaseBag;
use super::model::MilModel;
use crate::error::{Error, Result};

/// Members kept in the final ensemble.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 5;

/// Mean/std of a member's tune-set case scores, used to standardize its
/// outputs before averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
}

impl ScoreStats {
    /// Population mean/std. A zero spread falls back to unit scale so a
    /// degenerate member contributes a constant zero after centering.
    pub fn from_scores(scores: &[f64]) -> Result<ScoreStats> {
        if scores.is_empty() {
            return Err(Error::EmptyInput("scores"));
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        let std = if var > 0.0 { libm::sqrt(var) } else { 1.0 };
        Ok(ScoreStats { mean, std })
    }

    #[inline]
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

/// A trained model together with its tune-split evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedCandidate {
    pub model: MilModel,
    pub tune_cindex: f64,
    /// Case scores on the tune split (any fixed evaluation protocol).
    pub tune_scores: Vec<f64>,
}

/// One ensemble member with its standardization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub model: MilModel,
    pub tune_cindex: f64,
    pub stats: ScoreStats,
}

/// Mean-of-standardized-scores ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<EnsembleMember>,
}

/// Keep the `k` candidates with the highest tune c-index (ties keep the
/// earlier candidate); each member standardizes by its own tune statistics.
pub fn ensemble_top(candidates: Vec<TrainedCandidate>, k: usize) -> Result<Ensemble> {
    if k == 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "ensemble size must be >= 1"
        )));
    }
    if candidates.len() < k {
        return Err(Error::TooFewModels {
            have: candidates.len(),
            need: k,
        });
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .tune_cindex
            .partial_cmp(&candidates[a].tune_cindex)
            .expect("non-finite tune metric")
            .then(a.cmp(&b))
    });
    let mut members = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let stats = ScoreStats::from_scores(&candidates[i].tune_scores)?;
        members.push(EnsembleMember {
            model: candidates[i].model.clone(),
            tune_cindex: candidates[i].tune_cindex,
            stats,
        });
    }
    Ok(Ensemble { members })
}

/// Inference over one case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseInference {
    /// Mean over members of the standardized case score.
    pub case_score: f64,
    /// Per-patch ensemble scores, aligned with the case's flat patch order.
    pub patch_scores: Vec<f64>,
}

/// Deterministic exhaustive inference: every gated patch is used exactly
/// once; patch scores are member-standardized then averaged.
pub fn infer_case(ensemble: &Ensemble, case: &CaseBag) -> Result<CaseInference> {
    if ensemble.members.is_empty() {
        return Err(Error::TooFewModels { have: 0, need: 1 });
    }
    let n = case.total_patches();
    if n == 0 {
        return Err(Error::EmptyRoi);
    }
    let patches: Vec<&[f64]> = case.patches().collect();
    let mut patch_scores = alloc::vec![0.0; n];
    let mut case_score = 0.0;
    let k = ensemble.members.len() as f64;
    for member in &ensemble.members {
        let fwd = member.model.forward_bag(&patches)?;
        for (acc, s) in patch_scores.iter_mut().zip(&fwd.patch_scores) {
            *acc += member.stats.standardize(*s) / k;
        }
        case_score += member.stats.standardize(fwd.case_score) / k;
    }
    Ok(CaseInference {
        case_score,
        patch_scores,
    })
}
