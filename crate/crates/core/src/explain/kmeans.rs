//! Lloyd's k-means with k-means++ seeding.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeds::{child_rng, stream};

/// Maximum Lloyd iterations before giving up on an assignment fixpoint.
pub const KMEANS_MAX_ITERS: usize = 300;

/// Fitted centroid model over patch embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    /// Row-major `k x dim`.
    pub centroids: Vec<f64>,
    /// Number of points the model was fitted on.
    pub fit_sample_size: usize,
    /// Final within-cluster sum of squared distances.
    pub inertia: f64,
}

impl ClusterModel {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Nearest centroid; ties break to the lowest cluster id.
fn nearest(centroids: &[f64], k: usize, dim: usize, point: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for j in 0..k {
        let d = sq_dist(&centroids[j * dim..(j + 1) * dim], point);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    (best, best_d)
}

/// k-means++ seeding: the first centroid is uniform, later ones are drawn
/// with probability proportional to squared distance from the chosen set.
fn seed_centroids(points: &[f64], n: usize, dim: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(&points[i * dim..(i + 1) * dim], &centroids[0..dim]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining distances zero: duplicate points; any index works
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(&points[chosen * dim..(chosen + 1) * dim]);
        for i in 0..n {
            let d = sq_dist(&points[i * dim..(i + 1) * dim], &centroids[start..start + dim]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Fit `k` clusters on a flat row-major sample (`n x dim`). Lloyd iterations
/// run from a k-means++ start until the assignment fixpoint or
/// [`KMEANS_MAX_ITERS`]; an emptied cluster is re-seeded from the point
/// farthest from its assigned centroid. Deterministic per seed.
pub fn kmeans_fit(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<ClusterModel> {
    if dim == 0 {
        return Err(Error::InvalidArgument(alloc::format!("dim must be >= 1")));
    }
    if points.len() % dim != 0 {
        return Err(Error::LengthMismatch {
            expected: (points.len() / dim) * dim,
            got: points.len(),
        });
    }
    let n = points.len() / dim;
    if k == 0 {
        return Err(Error::InvalidArgument(alloc::format!("k must be >= 1")));
    }
    if n < k {
        return Err(Error::InvalidArgument(alloc::format!(
            "sample of {n} points cannot support k={k}"
        )));
    }

    let mut rng = child_rng(seed, stream::KMEANS, k as u64);
    let mut centroids = seed_centroids(points, n, dim, k, &mut rng);
    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    let mut inertia = f64::INFINITY;

    for _iter in 0..KMEANS_MAX_ITERS {
        // assign
        let mut changed = false;
        let mut new_inertia = 0.0;
        for i in 0..n {
            let (j, d) = nearest(&centroids, k, dim, &points[i * dim..(i + 1) * dim]);
            new_inertia += d;
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        debug_assert!(
            new_inertia <= inertia * (1.0 + 1e-12) + 1e-12,
            "inertia increased: {new_inertia} > {inertia}"
        );
        inertia = new_inertia;
        if !changed {
            break;
        }

        // update
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let j = assignment[i];
            counts[j] += 1;
            for d in 0..dim {
                sums[j * dim + d] += points[i * dim + d];
            }
        }
        let mut reseed_used: Vec<usize> = Vec::new();
        for j in 0..k {
            if counts[j] == 0 {
                // re-seed from the farthest point not already used
                let mut far_i = 0;
                let mut far_d = -1.0;
                for i in 0..n {
                    if reseed_used.contains(&i) {
                        continue;
                    }
                    let d = sq_dist(
                        &points[i * dim..(i + 1) * dim],
                        &centroids[assignment[i] * dim..(assignment[i] + 1) * dim],
                    );
                    if d > far_d {
                        far_d = d;
                        far_i = i;
                    }
                }
                reseed_used.push(far_i);
                centroids[j * dim..(j + 1) * dim]
                    .copy_from_slice(&points[far_i * dim..(far_i + 1) * dim]);
                // recomputed inertia may rise transiently after a re-seed
                inertia = f64::INFINITY;
            } else {
                for d in 0..dim {
                    centroids[j * dim + d] = sums[j * dim + d] / counts[j] as f64;
                }
            }
        }
    }

    // final inertia against the final centroids
    let mut final_inertia = 0.0;
    for i in 0..n {
        let (_, d) = nearest(&centroids, k, dim, &points[i * dim..(i + 1) * dim]);
        final_inertia += d;
    }

    Ok(ClusterModel {
        k,
        dim,
        centroids,
        fit_sample_size: n,
        inertia: final_inertia,
    })
}

/// Assign each point (flat `n x dim`) to its nearest centroid; ties go to
/// the lowest cluster id.
pub fn assign(model: &ClusterModel, points: &[f64], dim: usize) -> Result<Vec<usize>> {
    if dim != model.dim {
        return Err(Error::LengthMismatch {
            expected: model.dim,
            got: dim,
        });
    }
    if points.len() % dim != 0 {
        return Err(Error::LengthMismatch {
            expected: (points.len() / dim) * dim,
            got: points.len(),
        });
    }
    let n = points.len() / dim;
    Ok((0..n)
        .map(|i| {
            nearest(
                &model.centroids,
                model.k,
                model.dim,
                &points[i * dim..(i + 1) * dim],
            )
            .0
        })
        .collect())
}
