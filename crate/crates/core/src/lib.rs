//! Core of the latent-guard out-of-distribution detector.
//!
//! A one-class convolutional autoencoder is trained on a single image
//! class. Test samples are scored by their reconstruction error, by the
//! Mahalanobis distance of their latent embedding from the Gaussian fitted
//! to the encoded training set, or by a calibrated sum of the two.
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `std` feature
//! for runtime CPU dispatch in the matrix kernels.

#![no_std]
// NaN-rejecting guards are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autoencoder;
pub mod data;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod nn;
pub mod novelty;
pub mod stats;
pub mod tensor;
pub mod trainer;

pub use autoencoder::{ArchitectureConfig, AutoencoderModel};
pub use data::{filter_class, ImageDataset};
pub use error::{Error, Result};
pub use metrics::{EvalReport, Label, ScoredSet};
pub use novelty::{NoveltyCalibration, ScoreMode};
pub use stats::GaussianStats;
pub use tensor::Tensor;
pub use trainer::{TrainConfig, TrainRecord};
