//! Minimal deterministic neural-network engine: the layer types of the
//! convolutional autoencoder, their gradients, BCE + L1 loss and Adadelta.

pub mod activation;
pub mod adadelta;
pub mod conv;
pub mod dense;
pub mod init;
pub mod layer;
pub mod loss;
pub mod pool;
pub mod upsample;

pub use activation::{activation, activation_backward, Activation};
pub use adadelta::{AdadeltaConfig, AdadeltaState, ParamSlot};
pub use conv::{conv3x3_backward, conv3x3_forward, Conv3x3, ConvGrads};
pub use dense::{dense_forward, Dense};
pub use layer::{Cache, Layer, Sequential};
pub use loss::{bce_grad, bce_grad_over, bce_loss, bce_per_sample, l1_penalty, BCE_CLIP};
pub use pool::{maxpool2x2_backward, maxpool2x2_forward, Pooled};
pub use upsample::{upsample2x2_backward, upsample2x2_nearest};
