//! Brute-force threshold selection on a development set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset used for the accept-all / reject-all candidates.
pub const THRESHOLD_DELTA: f64 = 1e-6;

/// How a score is turned into a class-1 decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// `score >= θ` means class 1.
    AtLeast,
    /// `score <= θ` means class 0, so only `score > θ` is class 1.
    Above,
}

impl DecisionRule {
    pub fn decide(self, score: f64, theta: f64) -> u8 {
        let one = match self {
            DecisionRule::AtLeast => score >= theta,
            DecisionRule::Above => score > theta,
        };
        one as u8
    }
}

/// The θ maximising accuracy with `score >= θ → 1`.
pub fn tune_threshold(scores: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    tune_threshold_with(scores, labels, DecisionRule::AtLeast)
}

/// Candidates are `min - δ`, the midpoints of consecutive distinct scores and
/// `max + δ`. Ties in accuracy go to the smallest θ.
pub fn tune_threshold_with(scores: &[f64], labels: &[u8], rule: DecisionRule) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFiniteLoss(format!("threshold score {s}")));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Dataset(format!("label {l} is not 0/1")));
    }
    let mut pairs: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    // ones_before[i] = class-1 labels among the i lowest scores.
    let mut ones_before = Vec::with_capacity(pairs.len() + 1);
    ones_before.push(0usize);
    for p in &pairs {
        ones_before.push(ones_before.last().unwrap() + p.1 as usize);
    }
    let n = pairs.len();
    let total_ones = ones_before[n];
    let correct = |theta: f64| {
        // Scores below the cut are predicted 0.
        let cut = match rule {
            DecisionRule::AtLeast => sorted.partition_point(|&s| s < theta),
            DecisionRule::Above => sorted.partition_point(|&s| s <= theta),
        };
        let zeros_below = cut - ones_before[cut];
        let ones_above = total_ones - ones_before[cut];
        zeros_below + ones_above
    };
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let mut candidates = vec![lo - THRESHOLD_DELTA];
    for w in sorted.windows(2) {
        if w[1] > w[0] {
            candidates.push(w[0] + (w[1] - w[0]) / 2.0);
        }
    }
    candidates.push(hi + THRESHOLD_DELTA);
    // Candidates are increasing, so a strict improvement test keeps the smallest θ.
    let mut best = (candidates[0], correct(candidates[0]));
    for &theta in &candidates[1..] {
        let c = correct(theta);
        if c > best.1 {
            best = (theta, c);
        }
    }
    Ok((best.0, best.1 as f64 / n as f64))
}

/// Fraction of `labels` reproduced by `rule` at `theta`.
pub fn accuracy_at(scores: &[f64], labels: &[u8], theta: f64, rule: DecisionRule) -> f64 {
    let hits = scores.iter().zip(labels).filter(|(&s, &l)| rule.decide(s, theta) == l).count();
    hits as f64 / scores.len().max(1) as f64
}
