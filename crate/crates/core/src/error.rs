use alloc::vec::Vec;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("tensor shape {shape:?} does not describe {len} elements")]
    InvalidShape { shape: Vec<usize>, len: usize },
    #[error("2x2 max pooling needs even spatial dims, got {height}x{width}")]
    OddPoolDims { height: usize, width: usize },
    #[error("prediction {value} outside [0, 1]; is the output layer missing a sigmoid?")]
    PredictionOutOfRange { value: f64 },
    #[error("target {value} outside [0, 1]")]
    TargetOutOfRange { value: f64 },
    #[error("non-finite gradient in parameter tensor {tensor} at element {index}")]
    NonFiniteGradient { tensor: usize, index: usize },
    #[error("bottleneck size must be at least 1")]
    InvalidBottleneck,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("validation size {val_size} must be smaller than the dataset size {len}")]
    InvalidSplit { val_size: usize, len: usize },
    #[error("validation set is empty; early stopping needs validation data")]
    EmptyValidation,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("covariance not positive definite even with jitter {max_jitter:e}")]
    SingularCovariance { max_jitter: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero standard deviation of {feature} on the validation set")]
    DegenerateCalibration { feature: &'static str },
    #[error("hybrid scoring requires a calibration")]
    MissingCalibration,
    #[error("metric needs both inlier and OOD samples")]
    SingleClass,
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("digit {0} is not a valid class (0-9)")]
    InvalidDigit(u8),
    #[error("no samples of class {0}")]
    EmptyClass(u8),
    #[error("dataset must contain at least one image")]
    EmptyDataset,
    #[error("pixel value {value} outside [0, 1]")]
    PixelOutOfRange { value: f64 },
    #[error("invalid manifold: {0}")]
    InvalidManifold(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
