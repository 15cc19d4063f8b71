//! Training, prediction and evaluation.
//!
//! [`train`] drives every classification method (SoSNet on selective pairs,
//! SoSNet-rand and the siamese baseline on random pairs, and the
//! single-stream softmax baseline). [`train_regression`] is the two-stage
//! temperature pipeline: pair training with a scalar head, then a linear
//! model on extracted features.

mod eval;
mod linear;
mod regression;
mod report;
mod train;

pub use eval::{
    evaluate_classification, evaluate_regression, predict, predict_batch, predict_from_logits, ClassAccuracy,
    EvalReport, Prediction, RegressionReport,
};
pub use linear::{fit_eps_insensitive, fit_linear_head, LinearModel};
pub use regression::{
    predict_regression, train_regression, LinearHeadKind, ReferenceSvrParams, RegressionConfig, RegressionOutcome,
};
pub use report::{history_text, summary_json};
pub use train::{lr_at, train, EpochRecord, Method, TrainConfig, TrainOutcome};
