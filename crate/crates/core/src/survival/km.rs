//! Kaplan-Meier product-limit estimation.

use alloc::vec::Vec;

use super::{validate_cohort, SurvivalRecord};
use crate::error::Result;

const Z_95: f64 = 1.959963984540054;

/// Product-limit survival curve with Greenwood confidence bands on the
/// log(-log) scale.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KmCurve {
    /// Distinct event times, ascending (months).
    pub event_times: Vec<u32>,
    /// Survival estimate immediately after each event time; nonincreasing.
    pub survival: Vec<f64>,
    /// Pointwise 95% lower bound.
    pub ci_lower: Vec<f64>,
    /// Pointwise 95% upper bound.
    pub ci_upper: Vec<f64>,
    /// Number at risk just before each event time.
    pub at_risk: Vec<usize>,
}

impl KmCurve {
    /// Survival estimate at time `t`: the step value at the last event time
    /// at or before `t` (1 before the first event).
    pub fn survival_at(&self, t: u32) -> f64 {
        match self.event_times.partition_point(|&et| et <= t) {
            0 => 1.0,
            idx => self.survival[idx - 1],
        }
    }

    /// Confidence interval at time `t`, matching [`Self::survival_at`].
    pub fn ci_at(&self, t: u32) -> (f64, f64) {
        match self.event_times.partition_point(|&et| et <= t) {
            0 => (1.0, 1.0),
            idx => (self.ci_lower[idx - 1], self.ci_upper[idx - 1]),
        }
    }
}

/// Kaplan-Meier estimate over a cohort. Censored observations only reduce
/// the at-risk count; rows appear at distinct event times.
pub fn km_estimate(records: &[SurvivalRecord]) -> Result<KmCurve> {
    validate_cohort(records)?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| (records[i].time_months, !records[i].event));

    let n = records.len();
    let mut event_times = Vec::new();
    let mut survival = Vec::new();
    let mut ci_lower = Vec::new();
    let mut ci_upper = Vec::new();
    let mut at_risk_col = Vec::new();

    let mut s = 1.0;
    // running Greenwood sum: sum of d / (n (n - d))
    let mut greenwood = 0.0;
    let mut at_risk = n;
    let mut i = 0;
    while i < n {
        let t = records[order[i]].time_months;
        let mut events = 0usize;
        let mut total_at_t = 0usize;
        while i < n && records[order[i]].time_months == t {
            if records[order[i]].event {
                events += 1;
            }
            total_at_t += 1;
            i += 1;
        }
        if events > 0 {
            let nf = at_risk as f64;
            let df = events as f64;
            s *= 1.0 - df / nf;
            if events < at_risk {
                greenwood += df / (nf * (nf - df));
            }
            let (lo, hi) = loglog_ci(s, greenwood, events == at_risk);
            event_times.push(t);
            survival.push(s);
            ci_lower.push(lo);
            ci_upper.push(hi);
            at_risk_col.push(at_risk);
        }
        at_risk -= total_at_t;
    }

    Ok(KmCurve {
        event_times,
        survival,
        ci_lower,
        ci_upper,
        at_risk: at_risk_col,
    })
}

/// Greenwood interval on the log(-log) scale: S^exp(±z·se) where
/// se = sqrt(greenwood) / |ln S|. Collapses to a point when S hits 0.
fn loglog_ci(s: f64, greenwood: f64, exhausted: bool) -> (f64, f64) {
    if exhausted || s <= 0.0 {
        return (0.0, 0.0);
    }
    if greenwood == 0.0 {
        return (s, s);
    }
    let ln_s = libm::log(s);
    let se = libm::sqrt(greenwood) / libm::fabs(ln_s);
    let lo = libm::pow(s, libm::exp(Z_95 * se));
    let hi = libm::pow(s, libm::exp(-Z_95 * se));
    (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}
