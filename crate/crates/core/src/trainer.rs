//! One-class training: validation split, shuffled mini-batches, Adadelta on
//! BCE + L1, early stopping with best-snapshot restore.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{ArchitectureConfig, AutoencoderModel, DEFAULT_L1_LAMBDA};
use crate::data::{filter_class, ImageDataset};
use crate::error::{Error, Result};
use crate::nn::{AdadeltaConfig, AdadeltaState};

const SPLIT_STREAM: u64 = 1;
const EPOCH_STREAM_BASE: u64 = 1 << 32;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub inlier_class: u8,
    pub bottleneck_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Validation samples drawn from the full training set before filtering
    /// by class.
    pub val_size: usize,
    pub l1_lambda: f64,
    pub optimizer: AdadeltaConfig,
}

impl TrainConfig {
    pub fn new(inlier_class: u8, bottleneck_size: usize, seed: u64) -> Self {
        Self {
            inlier_class,
            bottleneck_size,
            max_epochs: 500,
            patience: 20,
            batch_size: 128,
            seed,
            val_size: 10_000,
            l1_lambda: DEFAULT_L1_LAMBDA,
            optimizer: AdadeltaConfig::default(),
        }
    }

    pub fn architecture(&self) -> ArchitectureConfig {
        ArchitectureConfig {
            bottleneck_size: self.bottleneck_size,
            l1_lambda: self.l1_lambda,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inlier_class > 9 {
            return Err(Error::InvalidDigit(self.inlier_class));
        }
        if self.bottleneck_size < 1 {
            return Err(Error::InvalidBottleneck);
        }
        if self.max_epochs == 0 || self.patience >= self.max_epochs {
            return Err(Error::InvalidConfig("patience must be smaller than max_epochs"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive"));
        }
        if self.val_size == 0 {
            return Err(Error::EmptyValidation);
        }
        Ok(())
    }
}

/// Random disjoint partition into `(train, validation)` with exactly
/// `val_size` validation samples. Each part keeps the original order.
pub fn split(dataset: &ImageDataset, val_size: usize, seed: u64) -> Result<(ImageDataset, ImageDataset)> {
    if val_size == 0 {
        return Err(Error::EmptyValidation);
    }
    if val_size >= dataset.len() {
        return Err(Error::InvalidSplit {
            val_size,
            len: dataset.len(),
        });
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut stream_rng(seed, SPLIT_STREAM));
    let (val, train) = order.split_at_mut(val_size);
    val.sort_unstable();
    train.sort_unstable();
    Ok((dataset.select(train)?, dataset.select(val)?))
}

/// Splits the full training set, then keeps only the inlier class in both
/// parts.
pub fn inlier_split(config: &TrainConfig, full: &ImageDataset) -> Result<(ImageDataset, ImageDataset)> {
    config.validate()?;
    let (train, val) = split(full, config.val_size, config.seed)?;
    Ok((
        filter_class(&train, config.inlier_class)?,
        filter_class(&val, config.inlier_class)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Early,
    MaxEpochs,
}

/// Patience-based stopping rule. Improvement means a strictly lower loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    wait: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Records the validation loss of `epoch` (1-based). Training stops at
    /// the first epoch closing a window of `patience` epochs without
    /// improvement.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            return StopDecision {
                improved: true,
                stop: false,
            };
        }
        self.wait += 1;
        StopDecision {
            improved: false,
            stop: self.wait >= self.patience,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop_reason: StopReason,
}

/// Mean per-sample training objective (reconstruction BCE + L1) over a
/// dataset, evaluated in chunks of `batch_size`.
pub fn dataset_loss(model: &AutoencoderModel, data: &ImageDataset, batch_size: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let loss = model.batch_loss(&data.batch(chunk))?;
        total += loss.total() * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Trains a fresh model on `train` (inliers only), monitoring `val`.
///
/// Returns the parameters from the epoch with the lowest validation loss.
/// `on_epoch` sees every epoch record as it is produced.
pub fn train(
    config: &TrainConfig,
    train: &ImageDataset,
    val: &ImageDataset,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(AutoencoderModel, TrainRecord)> {
    config.validate()?;
    train.expect_mnist_geometry()?;
    val.expect_mnist_geometry()?;
    let mut model = AutoencoderModel::from_config(config.architecture())?;
    let mut optimizer = AdadeltaState::new(config.optimizer, model.params().iter().map(|t| t.len()));
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut stream_rng(config.seed, EPOCH_STREAM_BASE + epoch as u64));
        let mut sum = 0.0;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let loss = model.compute_gradients(&train.batch(chunk))?.total();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_no });
            }
            optimizer.step(&mut model.slots())?;
            sum += loss * chunk.len() as f64;
        }
        let val_loss = dataset_loss(&model, val, config.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        let record = EpochRecord {
            epoch,
            train_loss: sum / train.len() as f64,
            val_loss,
        };
        on_epoch(&record);
        epochs.push(record);
        let decision = stopper.observe(epoch, val_loss);
        if decision.improved {
            best.clone_from(&model);
        }
        if decision.stop {
            stop_reason = StopReason::Early;
            break;
        }
    }

    Ok((
        best,
        TrainRecord {
            epochs,
            best_epoch: stopper.best_epoch(),
            best_val_loss: stopper.best_loss(),
            stop_reason,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn labelled(n: usize) -> ImageDataset {
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let bytes: Vec<u8> = (0..n * 4).map(|i| (i % 251) as u8).collect();
        ImageDataset::from_bytes(2, 2, &bytes, labels).unwrap()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let d = labelled(100);
        let (train, val) = split(&d, 30, 5).unwrap();
        assert_eq!((train.len(), val.len()), (70, 30));
        // Every image in this fixture is unique, so pixels identify samples.
        let mut seen: Vec<&[f64]> = train.pixels().chunks(4).chain(val.pixels().chunks(4)).collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut all: Vec<&[f64]> = d.pixels().chunks(4).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, all);
        assert_eq!(split(&d, 30, 5).unwrap(), (train, val));
        assert_ne!(split(&d, 30, 6).unwrap().1, split(&d, 30, 5).unwrap().1);
    }

    #[test]
    fn split_full_mnist_sizes() {
        let bytes = vec![0u8; 60_000];
        let labels: Vec<u8> = (0..60_000).map(|i| (i % 10) as u8).collect();
        let d = ImageDataset::from_bytes(1, 1, &bytes, labels).unwrap();
        let (t, v) = split(&d, 10_000, 0).unwrap();
        assert_eq!((t.len(), v.len()), (50_000, 10_000));
    }

    #[test]
    fn split_guards() {
        let d = labelled(10);
        assert_eq!(split(&d, 0, 1).unwrap_err(), Error::EmptyValidation);
        assert_eq!(
            split(&d, 10, 1).unwrap_err(),
            Error::InvalidSplit { val_size: 10, len: 10 }
        );
    }

    #[test]
    fn early_stopping_patience_window() {
        let mut s = EarlyStopping::new(20);
        let mut losses = vec![1.0];
        losses.extend(core::iter::repeat_n(1.1, 21));
        let mut stopped = None;
        for (i, &l) in losses.iter().enumerate() {
            if s.observe(i + 1, l).stop {
                stopped = Some(i + 1);
                break;
            }
        }
        // epochs 2..=21 are twenty epochs without improvement
        assert_eq!(stopped, Some(21));
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn early_stopping_requires_strict_improvement() {
        let mut s = EarlyStopping::new(2);
        assert!(s.observe(1, 1.0).improved);
        assert!(!s.observe(2, 1.0).improved);
        assert!(s.observe(3, 1.0).stop);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::new(3, 8, 1);
        assert!(c.validate().is_ok());
        c.patience = 500;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(3, 8, 1);
        c.val_size = 0;
        assert_eq!(c.validate().unwrap_err(), Error::EmptyValidation);
        assert_eq!(
            TrainConfig::new(10, 8, 1).validate().unwrap_err(),
            Error::InvalidDigit(10)
        );
        assert_eq!(
            TrainConfig::new(1, 0, 1).validate().unwrap_err(),
            Error::InvalidBottleneck
        );
    }
}
