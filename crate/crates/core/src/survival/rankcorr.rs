//! Spearman rank correlation with average ranks for ties.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special::student_t_two_sided_p;

/// Rank correlation and its t-approximation p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("non-finite value"));
    let mut ranks = alloc::vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation between two aligned samples (length >= 3), p-value
/// from the Student t approximation with n-2 degrees of freedom.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<SpearmanResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::InvalidArgument(alloc::format!(
            "spearman needs at least 3 observations, got {n}"
        )));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let nf = n as f64;
    let mean = (nf + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..n {
        let da = ra[i] - mean;
        let db = rb[i] - mean;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::ZeroRankVariance);
    }
    let rho = (cov / libm::sqrt(var_a * var_b)).clamp(-1.0, 1.0);
    let p_value = if libm::fabs(rho) >= 1.0 {
        0.0
    } else {
        let t = rho * libm::sqrt((nf - 2.0) / (1.0 - rho * rho));
        student_t_two_sided_p(t, nf - 2.0)
    };
    Ok(SpearmanResult { rho, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_pairs_are_extreme() {
        let a = [1.0, 2.0, 3.0, 5.0];
        let up = [2.0, 4.0, 9.0, 11.0];
        let down = [4.0, 3.0, 1.0, 0.5];
        assert_eq!(spearman(&a, &up).unwrap().rho, 1.0);
        assert_eq!(spearman(&a, &down).unwrap().rho, -1.0);
        assert_eq!(spearman(&a, &up).unwrap().p_value, 0.0);
    }

    #[test]
    fn textbook_example() {
        // ranks differ by a single swap: rho = 0.8, p = 0.2 exactly (df=2)
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        let r = spearman(&a, &b).unwrap();
        assert!((r.rho - 0.8).abs() < 1e-15);
        assert!((r.p_value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn constant_input_errors() {
        let a = [1.0, 1.0, 1.0];
        let b = [1.0, 2.0, 3.0];
        assert_eq!(spearman(&a, &b), Err(Error::ZeroRankVariance));
    }

    #[test]
    fn tied_values_use_average_ranks() {
        let ranks = average_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(ranks, alloc::vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn too_short_errors() {
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
