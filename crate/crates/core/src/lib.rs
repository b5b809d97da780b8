//! Weakly-supervised survival modeling toolkit.
//!
//! This crate contains the complete numeric core of the pipeline:
//!
//! - [`survival`] — Kaplan-Meier curves, the log-rank test, Cox proportional
//!   hazards regression with Breslow tie handling, Harrell's c-index,
//!   horizon-restricted AUC, Spearman rank correlation, and percentile /
//!   blocked bootstrap confidence intervals.
//! - [`mask`] — binary region-of-interest masks derived from probability
//!   heatmaps (threshold, component denoising, disk dilation), patch gating,
//!   and segmentation metrics.
//! - [`mil`] — the multiple-instance prognostic model: bag sampling, a
//!   feedforward patch encoder with mean pooling and a linear risk head,
//!   the batch Cox partial-likelihood loss with analytic gradients, Adam,
//!   checkpoint selection, top-k ensembling, and exhaustive inference.
//! - [`explain`] — k-means over patch embeddings, per-case cluster
//!   quantitation, ordinary least squares with adjusted R², forward stepwise
//!   feature selection, and per-cluster patch score summaries.
//! - [`synth`] — a deterministic synthetic cohort generator with planted
//!   prognostic cluster structure and proportional-hazards outcomes, used as
//!   the oracle for every other stage.
//!
//! The crate is `no_std` (with `alloc`); all floating-point transcendentals
//! go through `libm`, so results are reproducible across platforms. Every
//! randomized operation takes an explicit seed and is bit-reproducible.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod explain;
pub mod mask;
pub mod mil;
pub mod seeds;
pub mod survival;
pub mod synth;

mod linalg;
mod special;

pub use error::{Error, Result};
