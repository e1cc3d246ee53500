//! Metrics, the accuracy-weighted voting ensemble and the evaluation harness.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{EncodedWord, Instance, Label, Token};
use crate::error::{Error, Result};
use crate::taggers::{gold_labels, TrainedTagger};

/// Classification scores with class 1 as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub theta_used: Option<f64>,
    /// Names of ratios whose denominator was zero and were reported as 0.
    pub undefined: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Result<Metrics> {
        let total = tp + fp + fn_ + tn;
        if total == 0 {
            return Err(Error::EmptyInput);
        }
        let mut undefined = Vec::new();
        let precision = ratio(tp, tp + fp, "precision", &mut undefined);
        let recall = ratio(tp, tp + fn_, "recall", &mut undefined);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            undefined.push("f1".into());
            0.0
        };
        Ok(Metrics {
            accuracy: (tp + tn) as f64 / total as f64,
            recall,
            precision,
            f1,
            tp,
            fp,
            fn_,
            tn,
            theta_used: None,
            undefined,
        })
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn compute_metrics(preds: &[u8], golds: &[u8]) -> Result<Metrics> {
    if preds.len() != golds.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", preds.len(), golds.len())));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in preds.iter().zip(golds) {
        match (p, g) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            (0, 0) => tn += 1,
            _ => return Err(Error::Dataset(format!("labels must be 0/1, got prediction {p} gold {g}"))),
        }
    }
    Metrics::from_counts(tp, fp, fn_, tn)
}

/// `w_n = a_n / Σ a_i`.
pub fn ensemble_weights(accs: &[f64]) -> Result<Vec<f64>> {
    if accs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(a) = accs.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::config(format!("ensemble accuracies must be positive, got {a}")));
    }
    let sum: f64 = accs.iter().sum();
    Ok(accs.iter().map(|a| a / sum).collect())
}

/// Relative gap under which the two class weights count as tied; absorbs
/// rounding in the weight normalisation.
const VOTE_TIE_TOLERANCE: f64 = 1e-9;

/// Weighted vote. A tie goes to the prediction of the highest-weight member
/// (the first one if several share that weight).
pub fn ensemble_predict(member_preds: &[u8], weights: &[f64]) -> Result<u8> {
    if member_preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if member_preds.len() != weights.len() {
        return Err(Error::shape(format!("{} predictions for {} weights", member_preds.len(), weights.len())));
    }
    let (mut w0, mut w1) = (0.0, 0.0);
    for (&p, &w) in member_preds.iter().zip(weights) {
        match p {
            0 => w0 += w,
            1 => w1 += w,
            _ => return Err(Error::Dataset(format!("member prediction {p} is not 0/1"))),
        }
    }
    if (w1 - w0).abs() <= VOTE_TIE_TOLERANCE * (w0 + w1) {
        let mut best = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > weights[best] {
                best = i;
            }
        }
        return Ok(member_preds[best]);
    }
    Ok((w1 > w0) as u8)
}

/// Members with weights derived from per-member accuracies.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub members: Vec<TrainedTagger>,
    pub accuracies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EnsembleModel {
    /// Weights from each member's dev accuracy.
    pub fn from_dev_accuracy(members: Vec<TrainedTagger>) -> Result<Self> {
        let accs = members.iter().map(|m| m.dev_accuracy).collect();
        Self::with_accuracies(members, accs)
    }

    /// Weights from accuracies measured elsewhere, one per member.
    pub fn with_accuracies(members: Vec<TrainedTagger>, accuracies: Vec<f64>) -> Result<Self> {
        if members.len() != accuracies.len() {
            return Err(Error::shape(format!("{} members for {} accuracies", members.len(), accuracies.len())));
        }
        let weights = ensemble_weights(&accuracies)?;
        Ok(EnsembleModel { members, accuracies, weights })
    }

    pub fn predict(&self, words: &[EncodedWord]) -> Result<Vec<u8>> {
        let per_member: Vec<Vec<u8>> = self.members.iter().map(|m| m.predict(words)).collect::<Result<_>>()?;
        (0..words.len())
            .map(|i| {
                let votes: Vec<u8> = per_member.iter().map(|p| p[i]).collect();
                ensemble_predict(&votes, &self.weights)
            })
            .collect()
    }
}

/// Anything that assigns 0/1 to words.
pub trait Predictor {
    fn name(&self) -> String;
    fn predict_words(&self, words: &[EncodedWord]) -> Result<Vec<u8>>;
    fn theta(&self) -> Option<f64>;
}

impl Predictor for TrainedTagger {
    fn name(&self) -> String {
        self.method.to_string()
    }

    fn predict_words(&self, words: &[EncodedWord]) -> Result<Vec<u8>> {
        self.predict(words)
    }

    fn theta(&self) -> Option<f64> {
        Some(self.theta)
    }
}

impl Predictor for EnsembleModel {
    fn name(&self) -> String {
        "ensemble".into()
    }

    fn predict_words(&self, words: &[EncodedWord]) -> Result<Vec<u8>> {
        self.predict(words)
    }

    fn theta(&self) -> Option<f64> {
        None
    }
}

pub fn evaluate_token_level(p: &dyn Predictor, test: &[Token]) -> Result<Metrics> {
    let golds = gold_labels(test)?;
    let words: Vec<EncodedWord> = test.iter().map(Token::encode).collect();
    let mut m = compute_metrics(&p.predict_words(&words)?, &golds)?;
    m.theta_used = p.theta();
    Ok(m)
}

/// Every non-universal token of `instances`, in order.
pub fn pooled_tokens(instances: &[Instance]) -> Result<Vec<Token>> {
    let pooled: Vec<Token> =
        instances.iter().flat_map(|i| &i.tokens).filter(|t| t.label != Label::Universal).cloned().collect();
    if pooled.is_empty() {
        return Err(Error::Dataset("no language-tagged tokens in the instances".into()));
    }
    Ok(pooled)
}

/// Micro-averaged metrics over the pooled tokens of all instances, one row
/// per predictor.
pub fn evaluate_instance_level(predictors: &[&dyn Predictor], instances: &[Instance]) -> Result<Vec<(String, Metrics)>> {
    let pooled = pooled_tokens(instances)?;
    predictors.iter().map(|p| Ok((p.name(), evaluate_token_level(*p, &pooled)?))).collect()
}

pub const TSV_HEADER: &str = "method\tacc\trec\tprec\tf1\ttheta";

/// One row per method, fixed six-decimal formatting.
pub fn write_results_tsv<W: Write>(mut w: W, rows: &[(String, Metrics)]) -> Result<()> {
    writeln!(w, "{TSV_HEADER}")?;
    for (name, m) in rows {
        let theta = m.theta_used.map_or_else(|| "-".to_string(), |t| format!("{t:.6}"));
        writeln!(w, "{name}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{theta}", m.accuracy, m.recall, m.precision, m.f1)?;
    }
    Ok(())
}
