//! Adam optimizer with a staircase learning-rate decay.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Adam moment coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Staircase schedule: the rate is multiplied by `decay_rate` once per
/// completed `decay_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LrSchedule {
    pub initial: f64,
    pub decay_steps: u64,
    pub decay_rate: f64,
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.initial < 0.0 || !self.initial.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "learning rate {} invalid",
                self.initial
            )));
        }
        if self.decay_steps == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "decay_steps must be >= 1"
            )));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "decay_rate {} outside (0,1]",
                self.decay_rate
            )));
        }
        Ok(())
    }

    /// Learning rate in effect at a (0-based) step.
    pub fn at(&self, step: u64) -> f64 {
        let k = (step / self.decay_steps) as i32;
        self.initial * libm::pow(self.decay_rate, k as f64)
    }
}

/// First/second moment estimates plus the update counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn updates_applied(&self) -> u64 {
        self.t
    }
}

/// One Adam update in place, with bias correction; the learning rate comes
/// from the schedule at `step`. Non-finite gradients abort.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    hp: &AdamParams,
    schedule: &LrSchedule,
    step: u64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NumericalBlowup);
    }
    let lr = schedule.at(step);
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - libm::pow(hp.beta1, t);
    let bc2 = 1.0 - libm::pow(hp.beta2, t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (libm::sqrt(v_hat) + hp.epsilon);
    }
    Ok(())
}
