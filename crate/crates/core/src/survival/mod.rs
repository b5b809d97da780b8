//! Deterministic survival statistics.
//!
//! Kaplan-Meier estimation, the two-group log-rank test, Cox proportional
//! hazards regression with Breslow tie handling, Harrell's c-index,
//! horizon-restricted AUC, Spearman rank correlation, risk stratification,
//! and percentile / blocked bootstrap confidence intervals.

mod bootstrap;
mod concordance;
pub(crate) mod cox;
mod design;
mod km;
mod logrank;
mod rankcorr;

pub use bootstrap::{
    blocked_bootstrap_mean, bootstrap_ci, bootstrap_delta_ci, BlockedBootstrapMean, CiInterval,
    DEFAULT_BOOTSTRAP_SAMPLES,
};
pub use concordance::{auc_at_horizon, concordance_index, DEFAULT_HORIZON_MONTHS};
pub use cox::{breslow_partial_loglik, cox_fit, cox_partial_gradient, cox_partial_loglik, CoxFit};
pub use design::{ColumnEncoding, CovariateMatrix, DesignBuilder};
pub use km::{km_estimate, KmCurve};
pub use logrank::{logrank_test, LogRankResult};
pub use rankcorr::{spearman, SpearmanResult};

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One case's follow-up: time in whole months and the event indicator
/// (`true` when the disease-specific death was observed).
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurvivalRecord {
    pub case_id: String,
    pub time_months: u32,
    pub event: bool,
}

impl SurvivalRecord {
    /// Build a record, rejecting a follow-up time of zero months.
    pub fn new(case_id: impl Into<String>, time_months: u32, event: bool) -> Result<Self> {
        if time_months == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "time_months must be >= 1"
            )));
        }
        Ok(Self {
            case_id: case_id.into(),
            time_months,
            event,
        })
    }
}

/// Check the cohort preconditions shared by every statistic: nonempty and
/// unique case ids.
pub fn validate_cohort(records: &[SurvivalRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyInput("cohort"));
    }
    let mut seen = BTreeSet::new();
    for r in records {
        if r.time_months == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "time_months must be >= 1 (case {})",
                r.case_id
            )));
        }
        if !seen.insert(r.case_id.as_str()) {
            return Err(Error::DuplicateCaseId(r.case_id.clone()));
        }
    }
    Ok(())
}

/// Risk-group cut points taken from the tune-split score distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiskThresholds {
    /// 25th percentile of tune-set risk scores.
    pub low_cut: f64,
    /// 75th percentile of tune-set risk scores.
    pub high_cut: f64,
}

impl RiskThresholds {
    pub fn new(low_cut: f64, high_cut: f64) -> Result<Self> {
        if !(low_cut.is_finite() && high_cut.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "thresholds must be finite"
            )));
        }
        if low_cut > high_cut {
            return Err(Error::InvalidArgument(alloc::format!(
                "low_cut {low_cut} exceeds high_cut {high_cut}"
            )));
        }
        Ok(Self { low_cut, high_cut })
    }

    /// Quartile thresholds of a tune-score sample.
    pub fn from_tune_scores(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput("tune scores"));
        }
        Self::new(quantile(scores, 0.25), quantile(scores, 0.75))
    }
}

/// Risk stratum relative to the tune-split quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RiskGroup {
    Low,
    Medium,
    High,
}

impl RiskGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiskGroup::Low => "low",
            RiskGroup::Medium => "medium",
            RiskGroup::High => "high",
        }
    }
}

/// Assign each score to a risk group: at or below the low cut is low,
/// strictly above the high cut is high, anything else is medium.
pub fn stratify_risk(scores: &[f64], thresholds: &RiskThresholds) -> Vec<RiskGroup> {
    scores
        .iter()
        .map(|&s| {
            if s <= thresholds.low_cut {
                RiskGroup::Low
            } else if s > thresholds.high_cut {
                RiskGroup::High
            } else {
                RiskGroup::Medium
            }
        })
        .collect()
}

/// Quantile with linear interpolation between order statistics.
///
/// For probability `p` the index is `h = (n-1)p`; the result interpolates
/// between the floor and ceiling order statistics.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile"));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let p = p.clamp(0.0, 1.0);
    let h = (n - 1) as f64 * p;
    let lo = h as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
