//! Small dense linear algebra over flat row-major buffers.
//!
//! The statistics only ever factor matrices with at most a few dozen columns,
//! so plain Cholesky and Householder QR are all that is needed.

use alloc::vec;
use alloc::vec::Vec;

/// Cholesky factor L (row-major lower triangle) of a symmetric
/// positive-definite matrix, or `None` when a pivot collapses.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut max_diag: f64 = 0.0;
    for i in 0..n {
        max_diag = max_diag.max(libm::fabs(a[i * n + i]));
    }
    let tol = 1e-12 * max_diag.max(1e-300);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= tol {
                    return None;
                }
                l[i * n + i] = libm::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve A x = b given the Cholesky factor L of A.
pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// Inverse of A from its Cholesky factor, solving one column at a time.
pub(crate) fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = cholesky_solve(l, n, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
        e[j] = 0.0;
    }
    inv
}

/// Least-squares solution of `X beta = y` by Householder QR.
pub(crate) struct Lstsq {
    pub coef: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
    /// (XᵀX)⁻¹, row-major p×p; feeds coefficient standard errors.
    pub xtx_inv: Vec<f64>,
}

/// QR least squares. Returns `None` when the design is rank deficient
/// (relative diagonal tolerance 1e-10).
pub(crate) fn lstsq(x: &[f64], n: usize, p: usize, y: &[f64]) -> Option<Lstsq> {
    debug_assert_eq!(x.len(), n * p);
    debug_assert_eq!(y.len(), n);
    if n < p || p == 0 {
        return None;
    }
    let mut a = x.to_vec();
    let mut qty = y.to_vec();
    let mut v = vec![0.0; n];

    for k in 0..p {
        let mut norm_sq = 0.0;
        for i in k..n {
            let val = a[i * p + k];
            norm_sq += val * val;
        }
        let norm = libm::sqrt(norm_sq);
        if norm == 0.0 {
            // leave a zero pivot for the rank check below
            continue;
        }
        let alpha = if a[k * p + k] >= 0.0 { -norm } else { norm };
        for i in k..n {
            v[i] = a[i * p + k];
        }
        v[k] -= alpha;
        let mut vnorm_sq = 0.0;
        for i in k..n {
            vnorm_sq += v[i] * v[i];
        }
        if vnorm_sq > 0.0 {
            for j in k..p {
                let mut d = 0.0;
                for i in k..n {
                    d += v[i] * a[i * p + j];
                }
                let f = 2.0 * d / vnorm_sq;
                for i in k..n {
                    a[i * p + j] -= f * v[i];
                }
            }
            let mut d = 0.0;
            for i in k..n {
                d += v[i] * qty[i];
            }
            let f = 2.0 * d / vnorm_sq;
            for i in k..n {
                qty[i] -= f * v[i];
            }
        }
        a[k * p + k] = alpha;
        for i in (k + 1)..n {
            a[i * p + k] = 0.0;
        }
    }

    let mut max_diag: f64 = 0.0;
    for j in 0..p {
        max_diag = max_diag.max(libm::fabs(a[j * p + j]));
    }
    if max_diag == 0.0 {
        return None;
    }
    for j in 0..p {
        if libm::fabs(a[j * p + j]) < 1e-10 * max_diag {
            return None;
        }
    }

    // back-substitute R coef = (Qᵀy)[..p]
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let mut sum = qty[i];
        for j in (i + 1)..p {
            sum -= a[i * p + j] * coef[j];
        }
        coef[i] = sum / a[i * p + i];
    }

    let mut rss = 0.0;
    for &q in qty.iter().take(n).skip(p) {
        rss += q * q;
    }

    // R⁻¹ (upper triangular), then (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let mut rinv = vec![0.0; p * p];
    for j in (0..p).rev() {
        rinv[j * p + j] = 1.0 / a[j * p + j];
        for i in (0..j).rev() {
            let mut sum = 0.0;
            for k in (i + 1)..=j {
                sum += a[i * p + k] * rinv[k * p + j];
            }
            rinv[i * p + j] = -sum / a[i * p + i];
        }
    }
    let mut xtx_inv = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut sum = 0.0;
            for k in i.max(j)..p {
                sum += rinv[i * p + k] * rinv[j * p + k];
            }
            xtx_inv[i * p + j] = sum;
        }
    }

    Some(Lstsq { coef, rss, xtx_inv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cholesky_round_trip() {
        // A = [[4,2],[2,3]]
        let a = vec![4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        let x = cholesky_solve(&l, 2, &[8.0, 7.0]);
        // solve: 4x+2y=8, 2x+3y=7 -> x=1.25, y=1.5
        assert!((x[0] - 1.25).abs() < 1e-12);
        assert!((x[1] - 1.5).abs() < 1e-12);
        let inv = cholesky_inverse(&l, 2);
        // A^-1 = 1/8 [[3,-2],[-2,4]]
        assert!((inv[0] - 0.375).abs() < 1e-12);
        assert!((inv[1] + 0.25).abs() < 1e-12);
        assert!((inv[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = vec![1.0, 1.0, 1.0, 1.0];
        assert!(cholesky(&a, 2).is_none());
    }

    #[test]
    fn lstsq_exact_fit() {
        // y = 2 + 3x on x = 0..5, design [1, x]
        let n = 5;
        let mut x = vec![0.0; n * 2];
        let mut y = vec![0.0; n];
        for i in 0..n {
            x[i * 2] = 1.0;
            x[i * 2 + 1] = i as f64;
            y[i] = 2.0 + 3.0 * i as f64;
        }
        let fit = lstsq(&x, n, 2, &y).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-12);
        assert!((fit.coef[1] - 3.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        use rand::Rng;
        let mut rng = crate::seeds::root_rng(11);
        let n = 40;
        let p = 4;
        let mut x = vec![0.0; n * p];
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in 0..p {
                x[i * p + j] = rng.random::<f64>() - 0.5;
            }
            y[i] = rng.random::<f64>();
        }
        let fit = lstsq(&x, n, p, &y).unwrap();
        // normal equations via cholesky
        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];
        for i in 0..n {
            for a_ in 0..p {
                xty[a_] += x[i * p + a_] * y[i];
                for b_ in 0..p {
                    xtx[a_ * p + b_] += x[i * p + a_] * x[i * p + b_];
                }
            }
        }
        let l = cholesky(&xtx, p).unwrap();
        let beta = cholesky_solve(&l, p, &xty);
        let inv = cholesky_inverse(&l, p);
        for j in 0..p {
            assert!((fit.coef[j] - beta[j]).abs() < 1e-10);
            for k in 0..p {
                assert!((fit.xtx_inv[j * p + k] - inv[j * p + k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lstsq_rejects_duplicate_column() {
        let n = 6;
        let mut x = vec![0.0; n * 2];
        let mut y = vec![0.0; n];
        for i in 0..n {
            x[i * 2] = i as f64 + 1.0;
            x[i * 2 + 1] = i as f64 + 1.0;
            y[i] = i as f64;
        }
        assert!(lstsq(&x, n, 2, &y).is_none());
    }
}
