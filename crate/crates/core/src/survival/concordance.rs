//! Ranking metrics: Harrell's concordance index and horizon-restricted AUC.

use super::SurvivalRecord;
use crate::error::{Error, Result};

/// Five-year horizon in months.
pub const DEFAULT_HORIZON_MONTHS: u32 = 60;

/// Harrell's c-index over comparable pairs.
///
/// A pair is comparable when the earlier time is an event (ties in time are
/// comparable only between an event and a censored case). Higher scores must
/// rank earlier events higher; tied scores earn half credit.
pub fn concordance_index(scores: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("cohort"));
    }
    if scores.len() != records.len() {
        return Err(Error::LengthMismatch {
            expected: records.len(),
            got: scores.len(),
        });
    }
    let n = records.len();
    let mut comparable = 0.0;
    let mut credit = 0.0;
    for i in 0..n {
        if !records[i].event {
            continue;
        }
        let ti = records[i].time_months;
        for j in 0..n {
            if i == j {
                continue;
            }
            let tj = records[j].time_months;
            // i is the event case of the pair: j must live longer, or be
            // censored at the same time
            let is_comparable = tj > ti || (tj == ti && !records[j].event);
            // avoid double-counting event/event pairs (each visited twice)
            if tj == ti && records[j].event {
                continue;
            }
            if !is_comparable {
                continue;
            }
            comparable += 1.0;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    if comparable == 0.0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(credit / comparable)
}

/// ROC AUC for event-by-horizon labels.
///
/// Positives are events at or before the horizon; cases censored strictly
/// before the horizon are excluded; everything else is negative. Tied scores
/// earn half credit (Mann-Whitney convention).
pub fn auc_at_horizon(
    scores: &[f64],
    records: &[SurvivalRecord],
    horizon_months: u32,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("cohort"));
    }
    if scores.len() != records.len() {
        return Err(Error::LengthMismatch {
            expected: records.len(),
            got: scores.len(),
        });
    }
    let mut positives = alloc::vec::Vec::new();
    let mut negatives = alloc::vec::Vec::new();
    for (s, r) in scores.iter().zip(records) {
        if r.event && r.time_months <= horizon_months {
            positives.push(*s);
        } else if r.event || r.time_months >= horizon_months {
            // events after the horizon, or followed up to the horizon
            negatives.push(*s);
        }
        // censored before the horizon: excluded
    }
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::DegenerateLabels);
    }
    let mut credit = 0.0;
    for p in &positives {
        for q in &negatives {
            if p > q {
                credit += 1.0;
            } else if p == q {
                credit += 0.5;
            }
        }
    }
    Ok(credit / (positives.len() as f64 * negatives.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(id: &str, t: u32, e: bool) -> SurvivalRecord {
        SurvivalRecord::new(id, t, e).unwrap()
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let records = vec![rec("a", 1, true), rec("b", 2, true), rec("c", 3, true)];
        let scores = vec![-1.0, -2.0, -3.0];
        assert_eq!(concordance_index(&scores, &records).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_score_half() {
        let records = vec![rec("a", 1, true), rec("b", 2, true), rec("c", 3, false)];
        let scores = vec![0.5, 0.5, 0.5];
        assert_eq!(concordance_index(&scores, &records).unwrap(), 0.5);
    }

    #[test]
    fn three_pair_example() {
        // times [1,2,3], events [T,T,F], scores [3,1,2]:
        // pairs (a,b) concordant, (a,c) concordant, (b,c) discordant -> 2/3
        let records = vec![rec("a", 1, true), rec("b", 2, true), rec("c", 3, false)];
        let scores = vec![3.0, 1.0, 2.0];
        let c = concordance_index(&scores, &records).unwrap();
        assert!((c - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_comparable_pairs_errors() {
        let records = vec![rec("a", 5, false), rec("b", 7, false)];
        assert_eq!(
            concordance_index(&[1.0, 2.0], &records),
            Err(Error::NoComparablePairs)
        );
        // two events tied in time are not comparable either
        let tied = vec![rec("a", 5, true), rec("b", 5, true)];
        assert_eq!(
            concordance_index(&[1.0, 2.0], &tied),
            Err(Error::NoComparablePairs)
        );
    }

    #[test]
    fn auc_exclusion_example() {
        // events at month 12 (scores .9/.8), censored at 80 (scores .1/.2),
        // censored at 30 (score .5, excluded) -> AUC 1.0
        let records = vec![
            rec("a", 12, true),
            rec("b", 12, true),
            rec("c", 80, false),
            rec("d", 80, false),
            rec("e", 30, false),
        ];
        let scores = vec![0.9, 0.8, 0.1, 0.2, 0.5];
        let auc = auc_at_horizon(&scores, &records, DEFAULT_HORIZON_MONTHS).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn auc_identical_scores_half() {
        let records = vec![rec("a", 10, true), rec("b", 90, false)];
        let auc = auc_at_horizon(&[0.3, 0.3], &records, 60).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn auc_single_class_errors() {
        let records = vec![rec("a", 10, true), rec("b", 20, true)];
        assert_eq!(
            auc_at_horizon(&[0.1, 0.2], &records, 60),
            Err(Error::DegenerateLabels)
        );
    }

    #[test]
    fn censored_exactly_at_horizon_is_negative() {
        let records = vec![rec("a", 10, true), rec("b", 60, false)];
        let auc = auc_at_horizon(&[1.0, 0.0], &records, 60).unwrap();
        assert_eq!(auc, 1.0);
    }
}
