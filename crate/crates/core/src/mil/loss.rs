//! Batch Cox partial-likelihood loss.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::survival::cox::breslow_loglik_score_grad;
use crate::survival::SurvivalRecord;

/// Negative Breslow partial log-likelihood of case scores, with risk sets
/// restricted to the batch. Adding a constant to every score leaves the loss
/// unchanged. A batch without events is uninformative.
pub fn batch_cox_loss(case_scores: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    if case_scores.len() != records.len() {
        return Err(Error::LengthMismatch {
            expected: records.len(),
            got: case_scores.len(),
        });
    }
    let times: Vec<u32> = records.iter().map(|r| r.time_months).collect();
    let events: Vec<bool> = records.iter().map(|r| r.event).collect();
    match breslow_loglik_score_grad(&times, &events, case_scores) {
        Ok((ll, _)) => Ok(-ll),
        Err(Error::NoEvents) => Err(Error::UninformativeBatch),
        Err(e) => Err(e),
    }
}
