//! Experiment bundles: a directory holding a trained model, its latent
//! statistics, hybrid calibration, training log and a digest manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use latent_guard_core::autoencoder::ArchitectureConfig;
use latent_guard_core::trainer::{EpochRecord, TrainConfig, TrainRecord};
use latent_guard_core::{AutoencoderModel, GaussianStats, NoveltyCalibration, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container::{self, Container};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT: &str = "model.lgtc";
pub const STATS: &str = "stats.lgtc";
pub const CALIBRATION: &str = "calibration.json";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const TRAIN_SUMMARY: &str = "train_summary.json";
pub const SCORES: &str = "scores.csv";

pub const BUNDLE_VERSION: u32 = 1;
const CHECKPOINT_KIND: &str = "autoencoder_checkpoint";
const STATS_KIND: &str = "gaussian_stats";

pub fn eval_file(mode: latent_guard_core::ScoreMode) -> String {
    format!("eval_{}.json", mode.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatVersions {
    pub bundle: u32,
    pub container: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub formats: FormatVersions,
    pub config: TrainConfig,
    pub seed: u64,
    pub param_count: usize,
    pub created_at: String,
    pub digests: Vec<FileDigest>,
}

/// Everything produced by a training run.
#[derive(Debug, Clone)]
pub struct ExperimentBundle {
    pub config: TrainConfig,
    pub model: AutoencoderModel,
    pub stats: GaussianStats,
    pub calibration: Option<NoveltyCalibration>,
    pub record: TrainRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainSummary {
    best_epoch: usize,
    best_val_loss: f64,
    stop_reason: latent_guard_core::trainer::StopReason,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn checkpoint_container(model: &AutoencoderModel) -> Result<Container> {
    Ok(Container {
        kind: CHECKPOINT_KIND.into(),
        meta: serde_json::to_value(model.config)?,
        tensors: model
            .params()
            .into_iter()
            .enumerate()
            .map(|(i, t)| (format!("param{i:02}"), t.clone()))
            .collect(),
    })
}

pub fn model_from_container(c: &Container, path: &Path) -> Result<AutoencoderModel> {
    c.expect_kind(CHECKPOINT_KIND, path)?;
    let config: ArchitectureConfig = serde_json::from_value(c.meta.clone())?;
    let mut model = AutoencoderModel::from_config(config)?;
    model.load_params(c.tensors.iter().map(|(_, t)| t.clone()).collect())?;
    Ok(model)
}

pub fn stats_container(stats: &GaussianStats) -> Result<Container> {
    let d = stats.dim;
    Ok(Container {
        kind: STATS_KIND.into(),
        meta: serde_json::json!({ "dim": d, "jitter": stats.jitter }),
        tensors: vec![
            ("mu".into(), Tensor::new(vec![d], stats.mu.clone())?),
            ("sigma".into(), Tensor::new(vec![d, d], stats.sigma.clone())?),
            ("cholesky".into(), Tensor::new(vec![d, d], stats.cholesky.clone())?),
        ],
    })
}

pub fn stats_from_container(c: &Container, path: &Path) -> Result<GaussianStats> {
    c.expect_kind(STATS_KIND, path)?;
    let jitter = c
        .meta
        .get("jitter")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::format(path, "missing jitter"))?;
    let mu = c.tensor("mu", path)?.data().to_vec();
    let d = mu.len();
    let sigma = c.tensor("sigma", path)?;
    let chol = c.tensor("cholesky", path)?;
    if sigma.shape() != [d, d] || chol.shape() != [d, d] {
        return Err(Error::format(path, "covariance shape does not match mean"));
    }
    Ok(GaussianStats {
        dim: d,
        mu,
        sigma: sigma.data().to_vec(),
        cholesky: chol.data().to_vec(),
        jitter,
    })
}

fn train_log(epochs: &[EpochRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for e in epochs {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(path, e))
}

/// Writes `files` into a sibling temp directory and renames it to `dir`.
pub fn write_atomically(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<()> {
    if dir.exists() {
        return Err(Error::bundle(dir, "already exists"));
    }
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let name = dir
        .file_name()
        .ok_or_else(|| Error::bundle(dir, "bundle path has no final component"))?;
    let tmp = parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let result = files
        .iter()
        .try_for_each(|(f, bytes)| write_file(&tmp.join(f), bytes))
        .and_then(|_| fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e)));
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

impl ExperimentBundle {
    /// Serialized artifact files, in manifest order.
    fn artifacts(&self) -> Result<Vec<(&'static str, Vec<u8>)>> {
        let mut files = vec![
            (CHECKPOINT, checkpoint_container(&self.model)?.to_bytes()?),
            (STATS, stats_container(&self.stats)?.to_bytes()?),
        ];
        if let Some(c) = &self.calibration {
            files.push((CALIBRATION, pretty_json(c)?));
        }
        files.push((TRAIN_LOG, train_log(&self.record.epochs)?));
        files.push((
            TRAIN_SUMMARY,
            pretty_json(&TrainSummary {
                best_epoch: self.record.best_epoch,
                best_val_loss: self.record.best_val_loss,
                stop_reason: self.record.stop_reason,
            })?,
        ));
        Ok(files)
    }

    pub fn manifest(&self, digests: Vec<FileDigest>) -> Manifest {
        Manifest {
            formats: FormatVersions {
                bundle: BUNDLE_VERSION,
                container: container::FORMAT_VERSION,
            },
            config: self.config,
            seed: self.config.seed,
            param_count: self.model.param_count(),
            created_at: chrono::Utc::now().to_rfc3339(),
            digests,
        }
    }

    /// Writes the bundle to `dir`, which must not exist yet.
    pub fn save(&self, dir: &Path) -> Result<Manifest> {
        let mut files = self.artifacts()?;
        let digests = files
            .iter()
            .map(|(f, b)| FileDigest {
                file: (*f).into(),
                sha256: sha256_hex(b),
            })
            .collect();
        let manifest = self.manifest(digests);
        files.push((MANIFEST, pretty_json(&manifest)?));
        write_atomically(dir, &files)?;
        Ok(manifest)
    }

    /// Loads a bundle, verifying every digest in the manifest.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = read_manifest(dir)?;
        verify_digests(dir, &manifest)?;
        let listed = |f: &str| manifest.digests.iter().any(|d| d.file == f);

        let ckpt_path = dir.join(CHECKPOINT);
        let model = model_from_container(&Container::read(&ckpt_path)?, &ckpt_path)?;
        let stats_path = dir.join(STATS);
        let stats = stats_from_container(&Container::read(&stats_path)?, &stats_path)?;
        let cal_path = dir.join(CALIBRATION);
        let calibration = if listed(CALIBRATION) && cal_path.exists() {
            Some(serde_json::from_slice(&read(&cal_path)?)?)
        } else {
            None
        };
        let log_path = dir.join(TRAIN_LOG);
        let epochs = String::from_utf8_lossy(&read(&log_path)?)
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<EpochRecord>, _>>()?;
        let summary: TrainSummary = serde_json::from_slice(&read(&dir.join(TRAIN_SUMMARY))?)?;
        if model.bottleneck_size() != manifest.config.bottleneck_size || stats.dim != model.bottleneck_size() {
            return Err(Error::bundle(
                dir,
                "bottleneck size disagrees between manifest, model and stats",
            ));
        }
        Ok(Self {
            config: manifest.config,
            model,
            stats,
            calibration,
            record: TrainRecord {
                epochs,
                best_epoch: summary.best_epoch,
                best_val_loss: summary.best_val_loss,
                stop_reason: summary.stop_reason,
            },
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(Error::bundle(dir, "no manifest.json; not a bundle"));
    }
    let manifest: Manifest = serde_json::from_slice(&read(&path)?)?;
    if manifest.formats.bundle != BUNDLE_VERSION {
        return Err(Error::bundle(
            dir,
            format!("unsupported bundle version {}", manifest.formats.bundle),
        ));
    }
    Ok(manifest)
}

pub fn verify_digests(dir: &Path, manifest: &Manifest) -> Result<()> {
    for d in &manifest.digests {
        let actual = sha256_hex(&read(&dir.join(&d.file))?);
        if actual != d.sha256 {
            return Err(Error::bundle(dir, format!("digest mismatch for {}", d.file)));
        }
    }
    Ok(())
}
