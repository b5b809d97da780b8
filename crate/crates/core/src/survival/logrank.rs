//! Two-group log-rank test.

use alloc::vec::Vec;

use super::SurvivalRecord;
use crate::error::{Error, Result};
use crate::special::chi2_sf_1df;

/// Log-rank chi-square statistic (1 degree of freedom) and its p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogRankResult {
    pub chi2: f64,
    pub p_value: f64,
}

/// Standard two-group log-rank test: observed-minus-expected events in group
/// A accumulated over the pooled distinct event times, with the
/// hypergeometric variance.
pub fn logrank_test(
    group_a: &[SurvivalRecord],
    group_b: &[SurvivalRecord],
) -> Result<LogRankResult> {
    if group_a.is_empty() {
        return Err(Error::EmptyInput("group_a"));
    }
    if group_b.is_empty() {
        return Err(Error::EmptyInput("group_b"));
    }
    let any_event = group_a.iter().chain(group_b).any(|r| r.event);
    if !any_event {
        return Err(Error::NoEvents);
    }

    // (time, event, in_a) sorted by time
    let mut obs: Vec<(u32, bool, bool)> = group_a
        .iter()
        .map(|r| (r.time_months, r.event, true))
        .chain(group_b.iter().map(|r| (r.time_months, r.event, false)))
        .collect();
    obs.sort_by_key(|&(t, _, _)| t);

    let mut at_risk_a = group_a.len();
    let mut at_risk_b = group_b.len();
    let mut observed_minus_expected = 0.0;
    let mut variance = 0.0;

    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut deaths = 0usize;
        let mut deaths_a = 0usize;
        let mut leaving_a = 0usize;
        let mut leaving_b = 0usize;
        while i < obs.len() && obs[i].0 == t {
            let (_, event, in_a) = obs[i];
            if event {
                deaths += 1;
                if in_a {
                    deaths_a += 1;
                }
            }
            if in_a {
                leaving_a += 1;
            } else {
                leaving_b += 1;
            }
            i += 1;
        }
        let n = (at_risk_a + at_risk_b) as f64;
        if deaths > 0 && at_risk_a + at_risk_b > 0 {
            let n_a = at_risk_a as f64;
            let n_b = at_risk_b as f64;
            let d = deaths as f64;
            observed_minus_expected += deaths_a as f64 - d * n_a / n;
            if at_risk_a + at_risk_b > 1 {
                variance += d * (n_a / n) * (n_b / n) * (n - d) / (n - 1.0);
            }
        }
        at_risk_a -= leaving_a;
        at_risk_b -= leaving_b;
    }

    let chi2 = if variance > 0.0 {
        observed_minus_expected * observed_minus_expected / variance
    } else {
        // no time with both groups at risk contributes; the statistic is 0
        0.0
    };
    Ok(LogRankResult {
        chi2,
        p_value: chi2_sf_1df(chi2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec::Vec;

    fn rec(id: &str, t: u32, e: bool) -> SurvivalRecord {
        SurvivalRecord::new(id, t, e).unwrap()
    }

    #[test]
    fn identical_groups_give_zero() {
        let a: Vec<_> = (0..6)
            .map(|i| rec(&format!("a{i}"), 1 + i % 3, i % 2 == 0))
            .collect();
        let b: Vec<_> = (0..6)
            .map(|i| rec(&format!("b{i}"), 1 + i % 3, i % 2 == 0))
            .collect();
        let r = logrank_test(&a, &b).unwrap();
        assert!(r.chi2.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_groups_are_significant() {
        // group a: 10 events all at month 1; group b: 10 events all at month 10.
        // By hand: time 1 contributes O-E = 10 - 5 = 5, V = 10*0.25*10/19;
        // time 10 contributes nothing (group a exhausted). chi2 = 19.
        let a: Vec<_> = (0..10).map(|i| rec(&format!("a{i}"), 1, true)).collect();
        let b: Vec<_> = (0..10).map(|i| rec(&format!("b{i}"), 10, true)).collect();
        let r = logrank_test(&a, &b).unwrap();
        assert!((r.chi2 - 19.0).abs() < 1e-10);
        assert!(r.p_value < 0.001);
    }

    #[test]
    fn empty_group_errors() {
        let a = [rec("a", 1, true)];
        assert_eq!(logrank_test(&a, &[]), Err(Error::EmptyInput("group_b")));
        assert_eq!(logrank_test(&[], &a), Err(Error::EmptyInput("group_a")));
    }

    #[test]
    fn no_events_errors() {
        let a = [rec("a", 1, false)];
        let b = [rec("b", 2, false)];
        assert_eq!(logrank_test(&a, &b), Err(Error::NoEvents));
    }
}
