//! Losses, surrogate-gradient BPTT, Adam, gradient checking and
//! leave-groups-out cross-validation splits.

mod bptt;
mod folds;
mod gradcheck;
mod loss;
mod optim;

pub use bptt::{bptt_train, evaluate_accuracy, EpochRecord, Sample, TrainConfig, TrainHistory};
pub use folds::{kfold_split, Fold};
pub use gradcheck::{
    gradient_step_sweep, numeric_gradient, relative_error, soft_gradient, soft_gradient_check,
    GradientCheck, DEFAULT_STEP, MAX_GRADCHECK_PARAMETERS, RELATIVE_ERROR_FLOOR,
};
pub use loss::{hdc_loss, hdc_loss_counts, latency_loss, rate_loss, Objective, RateTarget};
pub use optim::{clip_global_norm, Adam, AdamConfig};
