//! Per-sample score table: `sample_id,true_is_inlier,re,ld,hybrid`.

use std::path::Path;

use latent_guard_core::novelty::Features;
use latent_guard_core::{Label, NoveltyCalibration, ScoreMode, ScoredSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_id: usize,
    pub true_is_inlier: bool,
    pub re: f64,
    pub ld: f64,
    /// Empty when the bundle has no calibration.
    pub hybrid: Option<f64>,
}

impl ScoreRow {
    pub fn label(&self) -> Label {
        if self.true_is_inlier {
            Label::Inlier
        } else {
            Label::Ood
        }
    }

    pub fn score(&self, mode: ScoreMode) -> Option<f64> {
        match mode {
            ScoreMode::Re => Some(self.re),
            ScoreMode::Ld => Some(self.ld),
            ScoreMode::Hybrid => self.hybrid,
        }
    }
}

pub fn rows_from_features(
    features: &Features,
    inlier: &[bool],
    calibration: Option<&NoveltyCalibration>,
) -> Vec<ScoreRow> {
    features
        .errors
        .iter()
        .zip(&features.distances)
        .zip(inlier)
        .enumerate()
        .map(|(i, ((&re, &ld), &is_in))| ScoreRow {
            sample_id: i,
            true_is_inlier: is_in,
            re,
            ld,
            hybrid: calibration.map(|c| c.hybrid(ld, re)),
        })
        .collect()
}

/// Builds the labelled score set for one mode.
pub fn scored_set(rows: &[ScoreRow], mode: ScoreMode) -> Result<ScoredSet> {
    let scores = rows
        .iter()
        .map(|r| r.score(mode))
        .collect::<Option<Vec<f64>>>()
        .ok_or(latent_guard_core::Error::MissingCalibration)?;
    Ok(ScoredSet::new(scores, rows.iter().map(ScoreRow::label).collect())?)
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn to_csv_bytes(rows: &[ScoreRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers()?.clone();
    let expected = ["sample_id", "true_is_inlier", "re", "ld", "hybrid"];
    if headers.iter().ne(expected) {
        return Err(Error::format(path, format!("expected header {}", expected.join(","))));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}
