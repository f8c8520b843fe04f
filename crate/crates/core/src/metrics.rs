//! OOD detection metrics over novelty scores (higher = more novel).
//!
//! Conventions: for AUROC and AUPR(out) the OOD samples are the positive
//! class; for AUPR(in) and FPR at a TPR target the inliers are positive and
//! a low score predicts "inlier". Samples with equal scores always cross a
//! threshold together.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::novelty::ScoreMode;

/// TPR at which the false positive rate is reported.
pub const TPR_TARGET: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Inlier,
    Ood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidConfig("NaN novelty score"));
        }
        Ok(Self { scores, labels })
    }

    /// Convenience constructor from separate inlier and OOD score lists.
    pub fn from_groups(inliers: &[f64], ood: &[f64]) -> Result<Self> {
        let scores = inliers.iter().chain(ood).copied().collect();
        let labels = core::iter::repeat_n(Label::Inlier, inliers.len())
            .chain(core::iter::repeat_n(Label::Ood, ood.len()))
            .collect();
        Self::new(scores, labels)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    fn require_both(&self) -> Result<(usize, usize)> {
        let (inl, ood) = (self.count(Label::Inlier), self.count(Label::Ood));
        if inl == 0 || ood == 0 {
            return Err(Error::SingleClass);
        }
        Ok((inl, ood))
    }

    /// `(key, is_positive)` pairs sorted by descending key, where the key
    /// ranks samples from most to least positive-looking.
    fn ranked(&self, positive: Label) -> Vec<(f64, bool)> {
        let sign = if positive == Label::Ood { 1.0 } else { -1.0 };
        let mut v: Vec<(f64, bool)> = self
            .scores
            .iter()
            .zip(&self.labels)
            .map(|(&s, &l)| (sign * s, l == positive))
            .collect();
        v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
        v
    }
}

/// Cumulative `(true positives, false positives)` after each group of tied
/// keys, walking from the most positive-looking sample down.
fn tie_grouped_counts(ranked: &[(f64, bool)]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < ranked.len() {
        let key = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == key {
            if ranked[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((tp, fp));
    }
    out
}

/// Area under the ROC curve with OOD as the positive class, by threshold
/// sweep and trapezoidal integration.
pub fn auroc(set: &ScoredSet) -> Result<f64> {
    let (n_in, n_ood) = set.require_both()?;
    let (mut area, mut prev_tpr, mut prev_fpr) = (0.0, 0.0, 0.0);
    for (tp, fp) in tie_grouped_counts(&set.ranked(Label::Ood)) {
        let tpr = tp as f64 / n_ood as f64;
        let fpr = fp as f64 / n_in as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(area)
}

/// Area under the precision-recall curve for the given positive class, as
/// the step sum `Σ (R_k - R_{k-1}) P_k` over descending thresholds.
pub fn aupr(set: &ScoredSet, positive: Label) -> Result<f64> {
    set.require_both()?;
    let n_pos = set.count(positive);
    let (mut area, mut prev_recall) = (0.0, 0.0);
    for (tp, fp) in tie_grouped_counts(&set.ranked(positive)) {
        let recall = tp as f64 / n_pos as f64;
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Smallest sample count `k` out of `n` with `k / n >= target`.
fn required_count(n: usize, target: f64) -> usize {
    (0..=n).find(|&k| k as f64 / n as f64 >= target).unwrap_or(n)
}

/// False positive rate at the smallest threshold `τ` that accepts at least
/// `tpr_target` of the inliers (`score <= τ`); the FPR is the fraction of
/// OOD samples with `score <= τ`.
pub fn fpr_at_tpr(set: &ScoredSet, tpr_target: f64) -> Result<f64> {
    let (n_in, n_ood) = set.require_both()?;
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(Error::InvalidConfig("tpr_target must lie in (0, 1]"));
    }
    let mut inliers: Vec<f64> = Vec::with_capacity(n_in);
    let mut ood: Vec<f64> = Vec::with_capacity(n_ood);
    for (&s, &l) in set.scores.iter().zip(&set.labels) {
        match l {
            Label::Inlier => inliers.push(s),
            Label::Ood => ood.push(s),
        }
    }
    inliers.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let k = required_count(n_in, tpr_target).max(1);
    let tau = inliers[k - 1];
    let accepted = ood.iter().filter(|&&s| s <= tau).count();
    Ok(accepted as f64 / n_ood as f64)
}

/// Identifies what an [`EvalReport`] was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalMeta {
    pub inlier_class: u8,
    pub bottleneck_size: usize,
    pub mode: ScoreMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub inlier_class: u8,
    pub bottleneck_size: usize,
    pub mode: ScoreMode,
    pub seed: u64,
    pub fpr_at_95_tpr: f64,
    pub auroc: f64,
    pub aupr_in: f64,
    pub aupr_out: f64,
}

/// All four metrics for a scored test set.
pub fn evaluate(set: &ScoredSet, meta: EvalMeta) -> Result<EvalReport> {
    Ok(EvalReport {
        inlier_class: meta.inlier_class,
        bottleneck_size: meta.bottleneck_size,
        mode: meta.mode,
        seed: meta.seed,
        fpr_at_95_tpr: fpr_at_tpr(set, TPR_TARGET)?,
        auroc: auroc(set)?,
        aupr_in: aupr(set, Label::Inlier)?,
        aupr_out: aupr(set, Label::Ood)?,
    })
}
