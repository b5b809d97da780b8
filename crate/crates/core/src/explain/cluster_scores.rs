//! Per-cluster patch-score summaries with slide-blocked confidence
//! intervals.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::seeds::{child_seed, stream};
use crate::survival::{blocked_bootstrap_mean, quantile};

/// Summary of the patch scores falling in one cluster.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterScore {
    pub cluster: usize,
    pub n_patches: usize,
    pub mean: f64,
    /// Blocked-bootstrap 95% interval of the mean (blocks are slides).
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// 25th / 75th percentiles of the patch scores.
    pub iqr_lower: f64,
    pub iqr_upper: f64,
}

/// Per-cluster results; clusters with no patches are reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchClusterScores {
    /// Present clusters in ascending cluster-id order.
    pub clusters: Vec<ClusterScore>,
    /// Cluster ids with zero patches, omitted from `clusters`.
    pub empty_clusters: Vec<usize>,
}

/// Pool patch scores per cluster and summarize each: mean, slide-blocked
/// bootstrap CI of the mean, and interquartile range.
pub fn patch_cluster_scores<B: Ord + Clone>(
    scores: &[f64],
    cluster_ids: &[usize],
    slide_ids: &[B],
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<PatchClusterScores> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("patch scores"));
    }
    if cluster_ids.len() != scores.len() || slide_ids.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            got: cluster_ids.len().min(slide_ids.len()),
        });
    }
    if let Some(&bad) = cluster_ids.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidArgument(alloc::format!(
            "cluster id {bad} out of range for k={k}"
        )));
    }

    let mut clusters = Vec::new();
    let mut empty_clusters = Vec::new();
    for cluster in 0..k {
        let mut values = Vec::new();
        let mut blocks = Vec::new();
        for i in 0..scores.len() {
            if cluster_ids[i] == cluster {
                values.push(scores[i]);
                blocks.push(slide_ids[i].clone());
            }
        }
        if values.is_empty() {
            empty_clusters.push(cluster);
            continue;
        }
        let boot = blocked_bootstrap_mean(
            &values,
            &blocks,
            n_samples,
            child_seed(seed, stream::CLUSTER_SCORES, cluster as u64),
        )?;
        clusters.push(ClusterScore {
            cluster,
            n_patches: values.len(),
            mean: boot.mean,
            ci_lower: boot.lower,
            ci_upper: boot.upper,
            iqr_lower: quantile(&values, 0.25),
            iqr_upper: quantile(&values, 0.75),
        });
    }
    Ok(PatchClusterScores {
        clusters,
        empty_clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_scores_give_point_summaries() {
        let scores = vec![2.5; 9];
        let ids = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let slides = vec!["a", "a", "b", "a", "b", "b", "a", "b", "a"];
        let out = patch_cluster_scores(&scores, &ids, &slides, 3, 200, 1).unwrap();
        assert_eq!(out.clusters.len(), 3);
        for c in &out.clusters {
            assert_eq!(c.mean, 2.5);
            assert_eq!(c.ci_lower, 2.5);
            assert_eq!(c.ci_upper, 2.5);
            assert_eq!(c.iqr_lower, 2.5);
            assert_eq!(c.iqr_upper, 2.5);
        }
    }

    #[test]
    fn empty_cluster_is_flagged() {
        let scores = vec![1.0, 2.0];
        let ids = vec![0, 2];
        let slides = vec!["s", "s"];
        let out = patch_cluster_scores(&scores, &ids, &slides, 3, 100, 5).unwrap();
        assert_eq!(out.empty_clusters, vec![1]);
        assert_eq!(out.clusters.len(), 2);
        // single slide block: CI collapses to the mean
        assert_eq!(out.clusters[0].ci_lower, 1.0);
        assert_eq!(out.clusters[0].ci_upper, 1.0);
    }

    #[test]
    fn highest_mean_cluster_ranks_first_by_mean() {
        let scores = vec![0.1, 0.2, 5.0, 5.2, -1.0, -1.2];
        let ids = vec![0, 0, 1, 1, 2, 2];
        let slides = vec!["s1", "s2", "s1", "s2", "s1", "s2"];
        let out = patch_cluster_scores(&scores, &ids, &slides, 3, 100, 9).unwrap();
        let best = out
            .clusters
            .iter()
            .max_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap())
            .unwrap();
        assert_eq!(best.cluster, 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let scores: Vec<f64> = (0..40).map(|i| (i % 7) as f64 * 0.3).collect();
        let ids: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let slides: Vec<usize> = (0..40).map(|i| i / 10).collect();
        let a = patch_cluster_scores(&scores, &ids, &slides, 4, 300, 77).unwrap();
        let b = patch_cluster_scores(&scores, &ids, &slides, 4, 300, 77).unwrap();
        assert_eq!(a, b);
    }
}
