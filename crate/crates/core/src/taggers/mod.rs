//! Token-level language taggers: recurrent and convolutional sigmoid
//! classifiers, and a siamese network scored against a support set.

pub mod pairs;
pub mod sequence;
pub mod siamese;
pub mod threshold;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use pairs::{enumerate_pairs, epoch_tiles, LabeledPair, Tile};
pub use sequence::{train_augmented, train_baseline, train_conv1d, SeqConfig};
pub use siamese::{train_siamese, ScoreHead, SiameseConfig};
pub use threshold::{tune_threshold, tune_threshold_with, DecisionRule};

use crate::data::{one_hot, EncodedWord, Token};
use crate::error::{Error, Result};
use crate::nn::{Network, ParamStore, Tensor};

/// Rows per inference call.
pub(crate) const PREDICT_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Conv1d,
    Augment,
    Siamese,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Baseline, Method::Conv1d, Method::Augment, Method::Siamese];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Conv1d => "conv1d",
            Method::Augment => "augment",
            Method::Siamese => "siamese",
        }
    }

    /// Parameter name prefix of this method's network.
    pub fn param_prefix(self) -> String {
        format!("{}.", self.as_str())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown method {s:?}")))
    }
}

/// How a tagger turns its network output into a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scorer {
    /// The sigmoid output is the score.
    Sigmoid,
    /// Sum of pair scores against a fixed set of class-0 words.
    Support { support: Vec<EncodedWord>, head: ScoreHead },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    /// Hash of the architecture and hyperparameters, not of the data.
    pub config_hash: String,
    /// Free-form name of the training data.
    pub dataset: String,
    pub train_tokens: usize,
}

/// A trained network with its tuned threshold.
#[derive(Debug, Clone)]
pub struct TrainedTagger {
    pub method: Method,
    pub net: Network,
    pub store: ParamStore<f32>,
    pub scorer: Scorer,
    pub theta: f64,
    pub dev_accuracy: f64,
    pub meta: TrainMeta,
}

impl TrainedTagger {
    pub fn rule(&self) -> DecisionRule {
        match self.scorer {
            Scorer::Sigmoid => DecisionRule::AtLeast,
            Scorer::Support { .. } => DecisionRule::Above,
        }
    }

    /// Raw network outputs for `words`, `[n, out]`, in inference mode.
    pub fn outputs(&self, words: &[EncodedWord]) -> Result<Tensor<f32>> {
        let width: usize = self.net.output_shape().iter().product();
        let mut out = Vec::with_capacity(words.len() * width);
        for chunk in words.chunks(PREDICT_CHUNK) {
            out.extend_from_slice(self.net.predict(&self.store, &one_hot(chunk))?.data());
        }
        Tensor::from_vec(&[words.len(), width], out)
    }

    /// Continuous score per word: the sigmoid output, or the support sum.
    pub fn scores(&self, words: &[EncodedWord]) -> Result<Vec<f64>> {
        match &self.scorer {
            Scorer::Sigmoid => Ok(self.outputs(words)?.data().iter().map(|&p| p as f64).collect()),
            Scorer::Support { support, head } => {
                let sup = self.outputs(support)?;
                let emb = self.outputs(words)?;
                Ok((0..words.len()).map(|i| head.support_sum(emb.row(i), &sup)).collect())
            }
        }
    }

    pub fn decide(&self, score: f64) -> u8 {
        self.rule().decide(score, self.theta)
    }

    pub fn predict(&self, words: &[EncodedWord]) -> Result<Vec<u8>> {
        Ok(self.scores(words)?.into_iter().map(|s| self.decide(s)).collect())
    }

    /// Predictions for labeled tokens; see [`gold_labels`].
    pub fn predict_tokens(&self, tokens: &[Token]) -> Result<Vec<u8>> {
        self.predict(&tokens.iter().map(Token::encode).collect::<Vec<_>>())
    }
}

/// 0/1 labels of `tokens`, rejecting universal tokens.
pub fn gold_labels(tokens: &[Token]) -> Result<Vec<u8>> {
    tokens
        .iter()
        .map(|t| t.label.class().ok_or_else(|| Error::Dataset(format!("token {:?} has no 0/1 label", t.surface))))
        .collect()
}

pub(crate) fn config_hash<S: Serialize>(value: &S) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(value)?);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn warn_if_imbalanced(what: &str, labels: &[u8]) {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones * 2 != labels.len() {
        log::warn!("{what}: {} class-0 vs {ones} class-1 tokens", labels.len() - ones);
    }
}
