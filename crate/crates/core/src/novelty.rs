//! Novelty scores: reconstruction error (RE), latent Mahalanobis distance
//! (LD) and their calibrated sum (H).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{AutoencoderModel, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::stats::GaussianStats;
use crate::tensor::Tensor;

/// A model exposing the two super-features used for scoring: a latent
/// embedding and a reconstruction error.
pub trait LatentModel {
    fn input_len(&self) -> usize;
    fn latent_dim(&self) -> usize;

    /// `(embedding, reconstruction_error)` of one flat input.
    fn embed(&self, x: &[f64]) -> Result<(Vec<f64>, f64)>;

    /// Row-major embeddings and errors for `n` concatenated inputs.
    fn embed_batch(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let len = self.input_len();
        if len == 0 || !xs.len().is_multiple_of(len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: xs.len(),
            });
        }
        let mut z = Vec::with_capacity(xs.len() / len * self.latent_dim());
        let mut errors = Vec::with_capacity(xs.len() / len);
        for x in xs.chunks_exact(len) {
            let (e, r) = self.embed(x)?;
            z.extend(e);
            errors.push(r);
        }
        Ok((z, errors))
    }
}

/// Images per forward pass when scoring with the autoencoder.
const SCORE_CHUNK: usize = 256;

impl LatentModel for AutoencoderModel {
    fn input_len(&self) -> usize {
        IMAGE_SIDE * IMAGE_SIDE
    }

    fn latent_dim(&self) -> usize {
        self.bottleneck_size()
    }

    fn embed(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (z, mut e) = self.embed_batch(x)?;
        match e.pop() {
            Some(err) if e.is_empty() => Ok((z, err)),
            _ => Err(Error::DimensionMismatch {
                expected: self.input_len(),
                actual: x.len(),
            }),
        }
    }

    fn embed_batch(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let len = self.input_len();
        if !xs.len().is_multiple_of(len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: xs.len(),
            });
        }
        let mut z = Vec::with_capacity(xs.len() / len * self.latent_dim());
        let mut errors = Vec::with_capacity(xs.len() / len);
        for chunk in xs.chunks(SCORE_CHUNK * len) {
            let n = chunk.len() / len;
            let batch = Tensor::new(alloc::vec![n, 1, IMAGE_SIDE, IMAGE_SIDE], chunk.to_vec())?;
            let (emb, err) = self.features_batch(&batch)?;
            z.extend_from_slice(emb.data());
            errors.extend(err);
        }
        Ok((z, errors))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreMode {
    /// Reconstruction error only.
    #[serde(rename = "RE")]
    Re,
    /// Latent Mahalanobis distance only.
    #[serde(rename = "LD")]
    Ld,
    /// `alpha * LD + beta * RE`.
    #[serde(rename = "H")]
    Hybrid,
}

impl ScoreMode {
    pub const ALL: [ScoreMode; 3] = [ScoreMode::Re, ScoreMode::Ld, ScoreMode::Hybrid];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMode::Re => "RE",
            ScoreMode::Ld => "LD",
            ScoreMode::Hybrid => "H",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "RE" | "re" => Some(ScoreMode::Re),
            "LD" | "ld" => Some(ScoreMode::Ld),
            "H" | "h" | "hybrid" => Some(ScoreMode::Hybrid),
            _ => None,
        }
    }
}

impl core::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mixing weights: reciprocal population standard deviations of the two
/// features over validation inliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoveltyCalibration {
    pub alpha: f64,
    pub beta: f64,
    pub val_dm_std: f64,
    pub val_re_std: f64,
}

/// Population standard deviation (divisor `n`).
pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

impl NoveltyCalibration {
    /// Weights from precomputed validation distances and errors.
    pub fn from_features(distances: &[f64], errors: &[f64]) -> Result<Self> {
        if distances.len() != errors.len() {
            return Err(Error::LengthMismatch {
                scores: distances.len(),
                labels: errors.len(),
            });
        }
        if distances.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: distances.len(),
            });
        }
        let val_dm_std = population_std(distances);
        let val_re_std = population_std(errors);
        if !(val_dm_std > 0.0 && val_dm_std.is_finite()) {
            return Err(Error::DegenerateCalibration {
                feature: "latent distance",
            });
        }
        if !(val_re_std > 0.0 && val_re_std.is_finite()) {
            return Err(Error::DegenerateCalibration {
                feature: "reconstruction error",
            });
        }
        Ok(Self {
            alpha: 1.0 / val_dm_std,
            beta: 1.0 / val_re_std,
            val_dm_std,
            val_re_std,
        })
    }

    pub fn hybrid(&self, distance: f64, error: f64) -> f64 {
        self.alpha * distance + self.beta * error
    }
}

/// Reconstruction errors and latent distances of a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub errors: Vec<f64>,
    pub distances: Vec<f64>,
}

impl Features {
    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn scores(&self, mode: ScoreMode, calibration: Option<&NoveltyCalibration>) -> Result<Vec<f64>> {
        Ok(match mode {
            ScoreMode::Re => self.errors.clone(),
            ScoreMode::Ld => self.distances.clone(),
            ScoreMode::Hybrid => {
                let c = calibration.ok_or(Error::MissingCalibration)?;
                self.distances
                    .iter()
                    .zip(&self.errors)
                    .map(|(&d, &e)| c.hybrid(d, e))
                    .collect()
            }
        })
    }
}

/// Both super-features for `n` concatenated inputs.
pub fn features<M: LatentModel + ?Sized>(model: &M, stats: &GaussianStats, xs: &[f64]) -> Result<Features> {
    let (z, errors) = model.embed_batch(xs)?;
    let distances = stats.mahalanobis_rows(&z)?;
    Ok(Features { errors, distances })
}

/// Calibrates the hybrid weights on validation inliers. `stats` must have
/// been fitted on the training inliers.
pub fn calibrate<M: LatentModel + ?Sized>(
    model: &M,
    stats: &GaussianStats,
    val_inliers: &[f64],
) -> Result<NoveltyCalibration> {
    let f = features(model, stats, val_inliers)?;
    NoveltyCalibration::from_features(&f.distances, &f.errors)
}

/// Novelty score of a single input.
pub fn score<M: LatentModel + ?Sized>(
    model: &M,
    stats: &GaussianStats,
    calibration: Option<&NoveltyCalibration>,
    x: &[f64],
    mode: ScoreMode,
) -> Result<f64> {
    if mode == ScoreMode::Hybrid && calibration.is_none() {
        return Err(Error::MissingCalibration);
    }
    let (z, error) = model.embed(x)?;
    Ok(match mode {
        ScoreMode::Re => error,
        ScoreMode::Ld => stats.mahalanobis(&z)?,
        ScoreMode::Hybrid => calibration
            .expect("checked above")
            .hybrid(stats.mahalanobis(&z)?, error),
    })
}

/// `true` marks a sample as novel: its score is strictly above `threshold`.
pub fn classify(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}
