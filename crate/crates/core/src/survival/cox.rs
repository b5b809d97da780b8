//! Cox proportional hazards regression with Breslow tie handling.
//!
//! Newton-Raphson on the partial log-likelihood, starting at zero, with
//! step-halving whenever a step would decrease the likelihood. Standard
//! errors come from the inverse observed information.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::design::CovariateMatrix;
use super::{validate_cohort, SurvivalRecord};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_inverse, cholesky_solve};
use crate::special::normal_two_sided_p;

const MAX_ITERATIONS: usize = 100;
const GRADIENT_TOL: f64 = 1e-7;
/// A converged Newton iterate must also have stopped moving; under a
/// monotone likelihood the gradient vanishes while the increment stays
/// order-one, and that case must fall through to the divergence test.
const STEP_TOL: f64 = 1e-3;
const MAX_STEP_HALVINGS: usize = 20;
/// Coefficient magnitude beyond which a still-improving likelihood is taken
/// as monotone (complete separation).
const SEPARATION_BOUND: f64 = 20.0;
const Z_95: f64 = 1.959963984540054;

/// Fitted Cox model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoxFit {
    /// Column names from the design matrix.
    pub names: Vec<String>,
    /// Coefficients (log hazard ratios).
    pub coefficients: Vec<f64>,
    /// Standard errors from the inverse observed information diagonal.
    pub std_errors: Vec<f64>,
    /// Breslow partial log-likelihood at the returned coefficients.
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl CoxFit {
    pub fn hazard_ratio(&self, j: usize) -> f64 {
        libm::exp(self.coefficients[j])
    }

    /// 95% confidence interval for the hazard ratio of column `j`.
    pub fn hazard_ratio_ci(&self, j: usize) -> (f64, f64) {
        let b = self.coefficients[j];
        let se = self.std_errors[j];
        (libm::exp(b - Z_95 * se), libm::exp(b + Z_95 * se))
    }

    /// Two-sided Wald p-value (normal approximation) for column `j`.
    pub fn wald_p(&self, j: usize) -> f64 {
        normal_two_sided_p(self.coefficients[j] / self.std_errors[j])
    }

    /// Linear predictor x·beta for new rows.
    pub fn linear_predictor(&self, x: &CovariateMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.coefficients.len() {
            return Err(Error::LengthMismatch {
                expected: self.coefficients.len(),
                got: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .map(|i| dot(x.row(i), &self.coefficients))
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Breslow partial log-likelihood of per-case risk scores.
///
/// Risk sets are formed over the given records only; ties share one
/// denominator. Errors when no event is present.
pub fn breslow_partial_loglik(times: &[u32], events: &[bool], scores: &[f64]) -> Result<f64> {
    let (ll, _) = breslow_loglik_score_grad(times, events, scores)?;
    Ok(ll)
}

/// Partial log-likelihood together with its gradient with respect to the
/// scores. Shared by the model-fitting code and the training loss.
pub(crate) fn breslow_loglik_score_grad(
    times: &[u32],
    events: &[bool],
    scores: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = times.len();
    if n == 0 {
        return Err(Error::EmptyInput("cohort"));
    }
    if events.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: events.len(),
        });
    }
    if scores.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: scores.len(),
        });
    }
    if !events.iter().any(|&e| e) {
        return Err(Error::NoEvents);
    }

    // shift scores for a stable exp; the likelihood is shift-invariant
    let max_s = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max_s.is_finite() {
        return Err(Error::NumericalBlowup);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| core::cmp::Reverse(times[i]));

    // event times descending, with (time, events d_t, s0 at t)
    let mut ll = 0.0;
    let mut event_blocks: Vec<(u32, f64, f64)> = Vec::new();
    let mut s0 = 0.0;
    let mut idx = 0;
    while idx < n {
        let t = times[order[idx]];
        let mut deaths = 0.0;
        while idx < n && times[order[idx]] == t {
            let i = order[idx];
            s0 += libm::exp(scores[i] - max_s);
            if events[i] {
                deaths += 1.0;
                ll += scores[i] - max_s;
            }
            idx += 1;
        }
        if deaths > 0.0 {
            ll -= deaths * libm::log(s0);
            event_blocks.push((t, deaths, s0));
        }
    }

    // grad_k = o_k - exp(s_k) * sum_{event times t <= t_k} d_t / S0(t)
    // prefix sums over event times ascending
    event_blocks.reverse();
    let mut cum: Vec<(u32, f64)> = Vec::with_capacity(event_blocks.len());
    let mut acc = 0.0;
    for &(t, d, s0_t) in &event_blocks {
        acc += d / s0_t;
        cum.push((t, acc));
    }
    let mut grad = vec![0.0; n];
    for k in 0..n {
        let pos = cum.partition_point(|&(t, _)| t <= times[k]);
        let hazard_mass = if pos == 0 { 0.0 } else { cum[pos - 1].1 };
        grad[k] = if events[k] { 1.0 } else { 0.0 } - libm::exp(scores[k] - max_s) * hazard_mass;
    }
    Ok((ll, grad))
}

/// Partial log-likelihood at an arbitrary coefficient vector.
pub fn cox_partial_loglik(
    records: &[SurvivalRecord],
    x: &CovariateMatrix,
    beta: &[f64],
) -> Result<f64> {
    let state = prepare(records, x)?;
    Ok(evaluate(&state, beta).loglik)
}

/// Analytic gradient of the partial log-likelihood at `beta`.
pub fn cox_partial_gradient(
    records: &[SurvivalRecord],
    x: &CovariateMatrix,
    beta: &[f64],
) -> Result<Vec<f64>> {
    let state = prepare(records, x)?;
    Ok(evaluate(&state, beta).gradient)
}

struct PreparedCohort {
    /// Row indices sorted by time descending.
    order: Vec<usize>,
    times: Vec<u32>,
    events: Vec<bool>,
    x: Vec<f64>,
    n: usize,
    p: usize,
}

struct Evaluation {
    loglik: f64,
    gradient: Vec<f64>,
    /// Observed information (negative Hessian), row-major p*p.
    information: Vec<f64>,
}

fn prepare(records: &[SurvivalRecord], x: &CovariateMatrix) -> Result<PreparedCohort> {
    validate_cohort(records)?;
    if x.n_rows() != records.len() {
        return Err(Error::LengthMismatch {
            expected: records.len(),
            got: x.n_rows(),
        });
    }
    if x.n_cols() == 0 {
        return Err(Error::EmptyInput("covariate columns"));
    }
    if !records.iter().any(|r| r.event) {
        return Err(Error::NoEvents);
    }
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| core::cmp::Reverse(records[i].time_months));
    Ok(PreparedCohort {
        order,
        times: records.iter().map(|r| r.time_months).collect(),
        events: records.iter().map(|r| r.event).collect(),
        x: x.data().to_vec(),
        n,
        p: x.n_cols(),
    })
}

fn evaluate(c: &PreparedCohort, beta: &[f64]) -> Evaluation {
    let (n, p) = (c.n, c.p);
    let eta: Vec<f64> = (0..n).map(|i| dot(&c.x[i * p..(i + 1) * p], beta)).collect();
    let max_eta = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut ll = 0.0;
    let mut grad = vec![0.0; p];
    let mut info = vec![0.0; p * p];

    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];

    let mut idx = 0;
    while idx < n {
        let t = c.times[c.order[idx]];
        let mut deaths = 0.0;
        let mut event_eta_sum = 0.0;
        let mut event_x_sum = vec![0.0; p];
        while idx < n && c.times[c.order[idx]] == t {
            let i = c.order[idx];
            let w = libm::exp(eta[i] - max_eta);
            let row = &c.x[i * p..(i + 1) * p];
            s0 += w;
            for j in 0..p {
                s1[j] += w * row[j];
                for k in 0..=j {
                    s2[j * p + k] += w * row[j] * row[k];
                }
            }
            if c.events[i] {
                deaths += 1.0;
                event_eta_sum += eta[i] - max_eta;
                for j in 0..p {
                    event_x_sum[j] += row[j];
                }
            }
            idx += 1;
        }
        if deaths > 0.0 {
            ll += event_eta_sum - deaths * libm::log(s0);
            for j in 0..p {
                let mean_j = s1[j] / s0;
                grad[j] += event_x_sum[j] - deaths * mean_j;
                for k in 0..=j {
                    let mean_k = s1[k] / s0;
                    info[j * p + k] += deaths * (s2[j * p + k] / s0 - mean_j * mean_k);
                }
            }
        }
    }
    for j in 0..p {
        for k in (j + 1)..p {
            info[j * p + k] = info[k * p + j];
        }
    }
    Evaluation {
        loglik: ll,
        gradient: grad,
        information: info,
    }
}

/// Fit a Cox model by Newton-Raphson on the Breslow partial likelihood.
pub fn cox_fit(records: &[SurvivalRecord], x: &CovariateMatrix) -> Result<CoxFit> {
    let cohort = prepare(records, x)?;
    let p = cohort.p;
    let mut beta = vec![0.0; p];
    let mut eval = evaluate(&cohort, &beta);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let grad_norm = eval
            .gradient
            .iter()
            .map(|g| libm::fabs(*g))
            .fold(0.0, f64::max);

        let l = cholesky(&eval.information, p).ok_or(Error::CollinearCovariates)?;
        let delta = cholesky_solve(&l, p, &eval.gradient);
        let step_norm = delta.iter().map(|d| libm::fabs(*d)).fold(0.0, f64::max);
        if grad_norm < GRADIENT_TOL && step_norm < STEP_TOL {
            converged = true;
            iterations = iter - 1;
            break;
        }

        // near the optimum the Newton gain can fall below the floating-point
        // resolution of the log-likelihood; a decrease within that noise is
        // a plateau, not a failed step
        let plateau = 1e-10 * (1.0 + libm::fabs(eval.loglik));
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(&delta)
                .map(|(b, d)| b + step * d)
                .collect();
            let cand_eval = evaluate(&cohort, &candidate);
            if cand_eval.loglik.is_finite() && cand_eval.loglik >= eval.loglik - plateau {
                accepted = Some((candidate, cand_eval));
                break;
            }
            step *= 0.5;
        }
        let Some((new_beta, new_eval)) = accepted else {
            // step-halving exhausted without improvement; report the last
            // iterate as non-converged
            break;
        };

        let improved = new_eval.loglik > eval.loglik;
        beta = new_beta;
        eval = new_eval;

        let beta_norm = beta.iter().map(|b| libm::fabs(*b)).fold(0.0, f64::max);
        if beta_norm > SEPARATION_BOUND && improved {
            return Err(Error::CompleteSeparation);
        }
    }

    let l = cholesky(&eval.information, p).ok_or(Error::CollinearCovariates)?;
    let inv = cholesky_inverse(&l, p);
    let std_errors: Vec<f64> = (0..p).map(|j| libm::sqrt(inv[j * p + j])).collect();

    Ok(CoxFit {
        names: x.names().to_vec(),
        coefficients: beta,
        std_errors,
        loglik: eval.loglik,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::DesignBuilder;
    use alloc::format;
    use rand::Rng;

    fn rec(id: &str, t: u32, e: bool) -> SurvivalRecord {
        SurvivalRecord::new(id, t, e).unwrap()
    }

    #[test]
    fn breslow_tied_example_at_zero() {
        // three records, two tied events at t=1 and one at t=2, scores all 0:
        // ll = -2 ln 3
        let times = [1, 1, 2];
        let events = [true, true, true];
        let scores = [0.0, 0.0, 0.0];
        let ll = breslow_partial_loglik(&times, &events, &scores).unwrap();
        assert!((ll + 2.0 * libm::log(3.0)).abs() < 1e-12);
    }

    #[test]
    fn loglik_is_shift_invariant() {
        let times = [3, 1, 4, 1, 5];
        let events = [true, false, true, true, false];
        let scores = [0.3, -0.2, 1.4, 0.0, -0.7];
        let shifted: alloc::vec::Vec<f64> = scores.iter().map(|s| s + 123.456).collect();
        let a = breslow_partial_loglik(&times, &events, &scores).unwrap();
        let b = breslow_partial_loglik(&times, &events, &shifted).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn score_gradient_matches_finite_differences() {
        let times = [2, 2, 3, 5, 7, 7, 9];
        let events = [true, false, true, true, false, true, false];
        let scores = [0.1, -0.4, 0.9, 0.2, -0.1, 0.5, 0.0];
        let (_, grad) = breslow_loglik_score_grad(&times, &events, &scores).unwrap();
        let eps = 1e-6;
        for k in 0..scores.len() {
            let mut plus = scores;
            plus[k] += eps;
            let mut minus = scores;
            minus[k] -= eps;
            let fd = (breslow_partial_loglik(&times, &events, &plus).unwrap()
                - breslow_partial_loglik(&times, &events, &minus).unwrap())
                / (2.0 * eps);
            assert!(
                (grad[k] - fd).abs() < 1e-7,
                "k={k}: analytic {} vs fd {fd}",
                grad[k]
            );
        }
    }

    #[test]
    fn complete_separation_detected() {
        // events at t=1 (x=1) and t=2 (x=0): likelihood is monotone in beta
        let records = [rec("a", 1, true), rec("b", 2, true)];
        let x = DesignBuilder::new(2)
            .numeric("x", &[1.0, 0.0])
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cox_fit(&records, &x), Err(Error::CompleteSeparation));
    }

    #[test]
    fn collinear_covariates_detected() {
        let records: alloc::vec::Vec<_> = (0..8)
            .map(|i| rec(&format!("c{i}"), i + 1, i % 2 == 0))
            .collect();
        let vals: alloc::vec::Vec<f64> = (0..8).map(|i| (i % 3) as f64).collect();
        let doubled: alloc::vec::Vec<f64> = vals.iter().map(|v| 2.0 * v).collect();
        let x = DesignBuilder::new(8)
            .numeric("a", &vals)
            .unwrap()
            .numeric("b", &doubled)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cox_fit(&records, &x), Err(Error::CollinearCovariates));
    }

    #[test]
    fn recovers_planted_binary_effect() {
        // exponential survival with hazard ratio 2 on a balanced binary
        // covariate, administrative censoring
        let mut rng = crate::seeds::root_rng(2024);
        let n = 2000;
        let beta_true = libm::log(2.0);
        let mut records = alloc::vec::Vec::with_capacity(n);
        let mut xcol = alloc::vec::Vec::with_capacity(n);
        for i in 0..n {
            let x = (i % 2) as f64;
            let rate = 0.02 * libm::exp(beta_true * x);
            let u: f64 = rng.random();
            let t = -libm::log(1.0 - u) / rate;
            let months = libm::ceil(t.min(120.0)) as u32;
            let event = t <= 120.0;
            records.push(rec(&format!("c{i}"), months.max(1), event));
            xcol.push(x);
        }
        let x = DesignBuilder::new(n)
            .indicator("arm", &xcol)
            .unwrap()
            .build()
            .unwrap();
        let fit = cox_fit(&records, &x).unwrap();
        assert!(fit.converged);
        assert!(
            (fit.coefficients[0] - beta_true).abs() < 0.15,
            "beta {} vs {}",
            fit.coefficients[0],
            beta_true
        );
        assert!(fit.std_errors[0] > 0.0 && fit.std_errors[0] < 0.2);
        assert!(fit.wald_p(0) < 1e-6);
        let (lo, hi) = fit.hazard_ratio_ci(0);
        assert!(lo < 2.0 && 2.0 < hi);
    }

    #[test]
    fn fit_is_a_local_maximum() {
        let mut rng = crate::seeds::root_rng(5);
        let n = 120;
        let mut records = alloc::vec::Vec::new();
        let mut a = alloc::vec::Vec::new();
        let mut b = alloc::vec::Vec::new();
        for i in 0..n {
            let xa: f64 = rng.random::<f64>() - 0.5;
            let xb: f64 = rng.random::<f64>() - 0.5;
            let rate = 0.05 * libm::exp(0.8 * xa - 0.3 * xb);
            let u: f64 = rng.random();
            let t = -libm::log(1.0 - u) / rate;
            let event = t <= 60.0;
            records.push(rec(&format!("c{i}"), (libm::ceil(t.min(60.0)) as u32).max(1), event));
            a.push(xa);
            b.push(xb);
        }
        let x = DesignBuilder::new(n)
            .numeric("a", &a)
            .unwrap()
            .numeric("b", &b)
            .unwrap()
            .build()
            .unwrap();
        let fit = cox_fit(&records, &x).unwrap();
        let ll_hat = cox_partial_loglik(&records, &x, &fit.coefficients).unwrap();
        let ll_zero = cox_partial_loglik(&records, &x, &[0.0, 0.0]).unwrap();
        assert!(ll_hat >= ll_zero);
        let eps = 1e-3;
        for j in 0..2 {
            for sign in [-1.0, 1.0] {
                let mut probe = fit.coefficients.clone();
                probe[j] += sign * eps;
                let ll = cox_partial_loglik(&records, &x, &probe).unwrap();
                assert!(ll <= ll_hat + 1e-12);
            }
        }
    }
}
