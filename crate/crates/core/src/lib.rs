//! Selective-pair comparison learning for subtle image attributes.
//!
//! The crate is organised bottom-up:
//!
//! * [`solar`] computes sunrise/sunset instants and labels timestamped frames.
//! * [`catalog`] ingests frame metadata, builds easy/hard splits and generates
//!   synthetic datasets with a controllable class cue.
//! * [`pairing`] enumerates and batches image pairs under the five pair
//!   constraint regimes.
//! * [`network`] is the shared-parameter stream (a small convolutional trunk
//!   with a 256-d embedding, a 2-way classifier head and a scalar rank head)
//!   with hand-written backpropagation and a finite-difference checker.
//! * [`losses`] holds every objective: softmax cross-entropy, the pairwise
//!   logistic ranking loss, the combined pair objective, contrastive loss and
//!   square loss.
//! * [`engine`] runs training, prediction, evaluation and the temperature
//!   regression pipeline.
//! * [`config`] reads and writes the plain `key=value` configuration files.

pub mod catalog;
pub mod config;
pub mod engine;
pub mod error;
pub mod losses;
pub mod network;
pub mod pairing;
pub mod seed;
pub mod solar;
pub mod tensor;

pub use error::{Error, ErrorCategory, Result};
pub use tensor::Tensor;
