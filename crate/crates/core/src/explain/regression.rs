//! Ordinary least squares with adjusted R² and forward stepwise selection.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::special::student_t_two_sided_p;
use crate::survival::CovariateMatrix;

/// Least-squares fit of scores on named features (intercept always
/// included).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Two-sided t-test p-values per coefficient.
    pub p_values: Vec<f64>,
    pub intercept: f64,
    pub intercept_std_error: f64,
    pub intercept_p: f64,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub n: usize,
}

/// Fit `y ~ 1 + x` by QR least squares.
///
/// Needs at least two more rows than feature columns. A rank-deficient
/// design (duplicated or linearly dependent columns) is rejected.
pub fn ols_fit(x: &CovariateMatrix, y: &[f64]) -> Result<OlsFit> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if p == 0 {
        return Err(Error::EmptyInput("feature columns"));
    }
    if n < p + 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "need at least {} rows for {p} features, got {n}",
            p + 2
        )));
    }

    // design with an intercept column up front
    let cols = p + 1;
    let mut design = alloc::vec![0.0; n * cols];
    for i in 0..n {
        design[i * cols] = 1.0;
        design[i * cols + 1..i * cols + cols].copy_from_slice(x.row(i));
    }
    let fit = lstsq(&design, n, cols, y).ok_or(Error::CollinearFeatures)?;

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    if sst == 0.0 {
        return Err(Error::ConstantColumn(String::from("response")));
    }
    let r2 = 1.0 - fit.rss / sst;
    let df = (n - p - 1) as f64;
    let adjusted_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;
    let sigma2 = fit.rss / df;

    let se = |j: usize| libm::sqrt(sigma2 * fit.xtx_inv[j * cols + j]);
    let pval = |coef: f64, se: f64| {
        if se == 0.0 {
            if coef == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            student_t_two_sided_p(coef / se, df)
        }
    };

    let intercept = fit.coef[0];
    let intercept_std_error = se(0);
    let mut coefficients = Vec::with_capacity(p);
    let mut std_errors = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 0..p {
        let c = fit.coef[j + 1];
        let s = se(j + 1);
        coefficients.push(c);
        std_errors.push(s);
        p_values.push(pval(c, s));
    }
    Ok(OlsFit {
        names: x.names().to_vec(),
        coefficients,
        std_errors,
        p_values,
        intercept,
        intercept_std_error,
        intercept_p: pval(intercept, intercept_std_error),
        r2,
        adjusted_r2,
        n,
    })
}

/// One accepted stepwise addition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseStep {
    /// Column index into the candidate matrix.
    pub feature: usize,
    /// Adjusted R² of the model after adding it.
    pub adjusted_r2: f64,
}

/// Forward stepwise selection result.
#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseResult {
    /// Selected column indices, in selection order.
    pub order: Vec<usize>,
    pub path: Vec<StepwiseStep>,
    /// Fit of the final selected subset.
    pub fit: OlsFit,
}

/// Greedy forward selection maximizing adjusted R², stopping after
/// `n_select` features. Ties resolve to the lowest feature index; candidates
/// whose fit is collinear are skipped.
pub fn forward_stepwise(
    x: &CovariateMatrix,
    y: &[f64],
    n_select: usize,
) -> Result<StepwiseResult> {
    let p = x.n_cols();
    if n_select == 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "n_select must be >= 1"
        )));
    }
    if p < n_select {
        return Err(Error::InvalidArgument(alloc::format!(
            "cannot select {n_select} of {p} features"
        )));
    }

    let mut selected: Vec<usize> = Vec::with_capacity(n_select);
    let mut path: Vec<StepwiseStep> = Vec::with_capacity(n_select);
    let mut last_error: Option<Error> = None;
    for _ in 0..n_select {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..p {
            if selected.contains(&j) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(j);
            let sub = x.select(&trial)?;
            match ols_fit(&sub, y) {
                Ok(fit) => match best {
                    Some((_, best_r2)) if fit.adjusted_r2 <= best_r2 => {}
                    _ => best = Some((j, fit.adjusted_r2)),
                },
                Err(e) => last_error = Some(e),
            }
        }
        match best {
            Some((j, adj)) => {
                selected.push(j);
                path.push(StepwiseStep {
                    feature: j,
                    adjusted_r2: adj,
                });
            }
            None => {
                // every remaining candidate failed; surface the cause if
                // nothing was selected at all
                if selected.is_empty() {
                    return Err(last_error.unwrap_or(Error::CollinearFeatures));
                }
                break;
            }
        }
    }
    let fit = ols_fit(&x.select(&selected)?, y)?;
    Ok(StepwiseResult {
        order: selected,
        path,
        fit,
    })
}

/// Regression of (already standardized) model scores on clinicopathologic
/// covariates. The matrix must use the standard encodings: indicators with
/// reference levels and numeric columns such as age in decades; a constant
/// column anywhere is rejected.
pub fn clinico_regression(x: &CovariateMatrix, scores: &[f64]) -> Result<OlsFit> {
    let p = x.n_cols();
    let n = x.n_rows();
    for j in 0..p {
        let col = x.column(j);
        if n > 0 && col.iter().all(|&v| v == col[0]) {
            return Err(Error::ConstantColumn(x.names()[j].clone()));
        }
    }
    ols_fit(x, scores)
}
