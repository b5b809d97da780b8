//! Weakly-supervised multiple-instance prognostic model.
//!
//! A case is a bag of patch feature vectors grouped by slide. Training draws
//! small random bags per case, encodes each patch with a shared feedforward
//! encoder, mean-pools to a case embedding, and applies a linear risk head;
//! the loss is the negative Breslow partial log-likelihood over the batch.

mod adam;
mod bag;
mod ensemble;
mod loss;
mod model;
mod search;
mod train;

pub use adam::{adam_step, AdamParams, AdamState, LrSchedule};
pub use bag::{gate_case, sample_bag, BagSampling, CaseBag, SlidePatches};
pub use ensemble::{
    ensemble_top, infer_case, CaseInference, Ensemble, EnsembleMember, ScoreStats,
    TrainedCandidate, DEFAULT_ENSEMBLE_SIZE,
};
pub use loss::batch_cox_loss;
pub use model::{encoder_widths, BagForward, DenseLayer, MilModel, ModelShape};
pub use search::{hyperparam_search, sample_configs, SearchOutcome, SearchSpace};
pub use train::{
    case_scores, select_checkpoint, train, train_resumed, Checkpoint, TrainConfig, TrainLogRow,
    TrainOutput,
};
