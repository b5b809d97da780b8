//! Percentile bootstrap confidence intervals.
//!
//! Replicates draw case indices with replacement; each replicate derives its
//! own generator from `(seed, replicate_index)`, so results do not depend on
//! evaluation order and are bit-reproducible.

use alloc::vec::Vec;

use rand::Rng;

use super::quantile;
use crate::error::{Error, Result};
use crate::seeds::{child_rng, stream};

/// Percentile interval bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CiInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Default replicate count.
pub const DEFAULT_BOOTSTRAP_SAMPLES: usize = 9999;

fn percentile_interval(mut values: Vec<f64>) -> CiInterval {
    values.sort_by(|a, b| a.partial_cmp(b).expect("non-finite replicate value"));
    CiInterval {
        lower: quantile(&values, 0.025),
        upper: quantile(&values, 0.975),
    }
}

fn resample_indices(n: usize, rng: &mut impl Rng, buf: &mut Vec<usize>) {
    buf.clear();
    for _ in 0..n {
        buf.push(rng.random_range(0..n));
    }
}

/// 95% percentile bootstrap interval of `metric` over case-level resamples.
///
/// `metric` receives the resampled indices and may return `None` when it is
/// undefined on that replicate (for example a single-class AUC); such
/// replicates are skipped, and more than 50% skipped is an error.
pub fn bootstrap_ci<F>(n: usize, n_samples: usize, seed: u64, metric: F) -> Result<CiInterval>
where
    F: Fn(&[usize]) -> Option<f64>,
{
    if n < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "bootstrap needs a sample of at least 2, got {n}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "bootstrap needs at least 1 replicate"
        )));
    }
    let mut values = Vec::with_capacity(n_samples);
    let mut idx = Vec::with_capacity(n);
    for rep in 0..n_samples {
        let mut rng = child_rng(seed, stream::BOOTSTRAP, rep as u64);
        resample_indices(n, &mut rng, &mut idx);
        if let Some(v) = metric(&idx) {
            values.push(v);
        }
    }
    let skipped = n_samples - values.len();
    if skipped * 2 > n_samples {
        return Err(Error::DegenerateResamples {
            skipped,
            total: n_samples,
        });
    }
    Ok(percentile_interval(values))
}

/// Paired bootstrap interval of `metric_a - metric_b`, evaluating both on the
/// same resampled indices. Replicates where either side is undefined are
/// skipped under the same policy as [`bootstrap_ci`].
pub fn bootstrap_delta_ci<A, B>(
    n: usize,
    n_samples: usize,
    seed: u64,
    metric_a: A,
    metric_b: B,
) -> Result<CiInterval>
where
    A: Fn(&[usize]) -> Option<f64>,
    B: Fn(&[usize]) -> Option<f64>,
{
    bootstrap_ci(n, n_samples, seed, |idx| {
        match (metric_a(idx), metric_b(idx)) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        }
    })
}

/// Blocked bootstrap of a pooled mean.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockedBootstrapMean {
    /// Pooled mean of the original values.
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Resample whole blocks (e.g. slides) with replacement and recompute the
/// pooled mean per replicate; percentile 95% interval.
pub fn blocked_bootstrap_mean<B: Ord>(
    values: &[f64],
    blocks: &[B],
    n_samples: usize,
    seed: u64,
) -> Result<BlockedBootstrapMean> {
    if values.is_empty() {
        return Err(Error::EmptyInput("values"));
    }
    if blocks.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            got: blocks.len(),
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "bootstrap needs at least 1 replicate"
        )));
    }

    // group values by block, preserving within-block order
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| blocks[a].cmp(&blocks[b]).then(a.cmp(&b)));
    let mut block_sums: Vec<(f64, usize)> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut sum = 0.0;
        let mut count = 0usize;
        let start = i;
        while i < order.len() && blocks[order[i]] == blocks[order[start]] {
            sum += values[order[i]];
            count += 1;
            i += 1;
        }
        block_sums.push((sum, count));
    }
    let n_blocks = block_sums.len();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if n_blocks == 1 {
        return Ok(BlockedBootstrapMean {
            mean,
            lower: mean,
            upper: mean,
        });
    }

    let mut replicate_means = Vec::with_capacity(n_samples);
    for rep in 0..n_samples {
        let mut rng = child_rng(seed, stream::BOOTSTRAP, rep as u64);
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..n_blocks {
            let (s, c) = block_sums[rng.random_range(0..n_blocks)];
            sum += s;
            count += c;
        }
        replicate_means.push(sum / count as f64);
    }
    let interval = percentile_interval(replicate_means);
    Ok(BlockedBootstrapMean {
        mean,
        lower: interval.lower,
        upper: interval.upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn constant_metric_gives_point_interval() {
        let ci = bootstrap_ci(10, 200, 1, |_| Some(3.5)).unwrap();
        assert_eq!(ci.lower, 3.5);
        assert_eq!(ci.upper, 3.5);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let data: Vec<f64> = (0..50).map(|i| (i as f64) * 0.13 - 2.0).collect();
        let f = |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let a = bootstrap_ci(data.len(), 500, 42, f).unwrap();
        let b = bootstrap_ci(data.len(), 500, 42, f).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_ci(data.len(), 500, 43, f).unwrap();
        assert!(a != c);
    }

    #[test]
    fn skip_policy_enforced() {
        // metric undefined on ~every replicate
        let err = bootstrap_ci(5, 100, 7, |_| None).unwrap_err();
        assert!(matches!(err, Error::DegenerateResamples { .. }));
        // under 50% skipped is tolerated
        let ci = bootstrap_ci(5, 100, 7, |idx| {
            // deterministic in the indices: skip when first index is 0
            if idx[0] == 0 {
                None
            } else {
                Some(1.0)
            }
        })
        .unwrap();
        assert_eq!(ci.lower, 1.0);
    }

    #[test]
    fn paired_delta_of_identical_metrics_is_zero() {
        let data: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let m = |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>());
        let ci = bootstrap_delta_ci(20, 300, 9, m, m).unwrap();
        assert_eq!(ci.lower, 0.0);
        assert_eq!(ci.upper, 0.0);
    }

    #[test]
    fn single_block_collapses_to_point() {
        let values = vec![1.0, 2.0, 3.0];
        let blocks = vec!["s1", "s1", "s1"];
        let r = blocked_bootstrap_mean(&values, &blocks, 100, 3).unwrap();
        assert_eq!(r.mean, 2.0);
        assert_eq!(r.lower, 2.0);
        assert_eq!(r.upper, 2.0);
    }

    #[test]
    fn two_block_replicates_take_three_values() {
        // blocks with means 0 and 1: the four equally likely block multisets
        // give replicate means 0, 0.5 or 1. A single-replicate interval
        // exposes one replicate mean directly.
        let mut values = vec![0.0; 50];
        values.extend(vec![1.0; 50]);
        let blocks: Vec<&str> = core::iter::repeat_n("a", 50)
            .chain(core::iter::repeat_n("b", 50))
            .collect();
        let mut seen = vec![];
        for seed in 0..32 {
            let r = blocked_bootstrap_mean(&values, &blocks, 1, seed).unwrap();
            assert_eq!(r.mean, 0.5);
            assert_eq!(r.lower, r.upper);
            assert!(
                r.lower == 0.0 || r.lower == 0.5 || r.lower == 1.0,
                "unexpected replicate mean {}",
                r.lower
            );
            seen.push(r.lower);
        }
        // all three outcomes occur across seeds
        assert!(seen.contains(&0.0) && seen.contains(&0.5) && seen.contains(&1.0));
    }

    #[test]
    fn blocked_same_seed_reproduces() {
        let values: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let blocks: Vec<usize> = (0..30).map(|i| i / 5).collect();
        let a = blocked_bootstrap_mean(&values, &blocks, 400, 5).unwrap();
        let b = blocked_bootstrap_mean(&values, &blocks, 400, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_input_errors() {
        let none: [f64; 0] = [];
        let blocks: [&str; 0] = [];
        assert!(blocked_bootstrap_mean(&none, &blocks, 10, 1).is_err());
    }
}
