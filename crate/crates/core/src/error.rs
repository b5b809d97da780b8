//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by the statistics, modeling, and generation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input collection that must be nonempty was empty ("empty cohort",
    /// "empty group", ...). Carries the name of the offending input.
    EmptyInput(&'static str),
    /// Two aligned inputs disagree in length or dimension.
    LengthMismatch { expected: usize, got: usize },
    /// A value or configuration field is outside its documented domain.
    InvalidArgument(String),
    /// Duplicate case id within a cohort.
    DuplicateCaseId(String),
    /// No events observed where at least one is required.
    NoEvents,
    /// No comparable pair exists for the concordance index.
    NoComparablePairs,
    /// Only one class label remains after horizon exclusion.
    DegenerateLabels,
    /// Rank correlation is undefined because an input is constant.
    ZeroRankVariance,
    /// The observed information matrix is singular.
    CollinearCovariates,
    /// Monotone partial likelihood: the coefficient diverges.
    CompleteSeparation,
    /// A regression design matrix is rank deficient.
    CollinearFeatures,
    /// A column that must vary is constant.
    ConstantColumn(String),
    /// More than half of the bootstrap replicates were undefined.
    DegenerateResamples { skipped: usize, total: usize },
    /// A case has no patches inside the region of interest.
    EmptyRoi,
    /// A training batch contained no events after the resampling budget.
    UninformativeBatch,
    /// A gradient or parameter became non-finite.
    NumericalBlowup,
    /// Fewer checkpoints than the smoothing window requires.
    TooFewCheckpoints { have: usize, need: usize },
    /// Fewer trained models than the requested ensemble size.
    TooFewModels { have: usize, need: usize },
    /// The requested censoring rate cannot be reached.
    InfeasibleCensorRate { target: f64, minimum: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput(what) => write!(f, "empty {what}"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DuplicateCaseId(id) => write!(f, "duplicate case id: {id}"),
            Error::NoEvents => write!(f, "no events"),
            Error::NoComparablePairs => write!(f, "no comparable pairs"),
            Error::DegenerateLabels => write!(f, "degenerate labels"),
            Error::ZeroRankVariance => write!(f, "zero rank variance"),
            Error::CollinearCovariates => write!(f, "collinear covariates"),
            Error::CompleteSeparation => write!(f, "complete separation"),
            Error::CollinearFeatures => write!(f, "collinear features"),
            Error::ConstantColumn(name) => write!(f, "constant column: {name}"),
            Error::DegenerateResamples { skipped, total } => {
                write!(f, "degenerate resamples: {skipped} of {total} skipped")
            }
            Error::EmptyRoi => write!(f, "empty ROI"),
            Error::UninformativeBatch => write!(f, "uninformative batch"),
            Error::NumericalBlowup => write!(f, "numerical blowup"),
            Error::TooFewCheckpoints { have, need } => {
                write!(f, "too few checkpoints: have {have}, need {need}")
            }
            Error::TooFewModels { have, need } => {
                write!(f, "too few models: have {have}, need {need}")
            }
            Error::InfeasibleCensorRate { target, minimum } => {
                write!(
                    f,
                    "infeasible censor rate: target {target} below attainable minimum {minimum}"
                )
            }
        }
    }
}

impl core::error::Error for Error {}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics themselves (as opposed to invalid
    /// inputs). Drivers map these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CollinearCovariates
                | Error::CompleteSeparation
                | Error::CollinearFeatures
                | Error::DegenerateResamples { .. }
                | Error::NumericalBlowup
                | Error::UninformativeBatch
        )
    }
}
