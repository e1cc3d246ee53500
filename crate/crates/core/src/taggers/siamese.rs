//! Twin GRU encoder trained with a contrastive loss on token pairs, tagging
//! by comparison against a support set of class-0 words.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{one_hot, sample_unique, EncodedWord, Token, SYMBOLS, WORD_LEN};
use crate::error::{Error, Result};
use crate::nn::loss::{contrastive_batch, dw_distance, DISTANCE_LAMBDA};
use crate::nn::{l2_penalty, sigmoid, Activation, LayerSpec, Mode, Network, Optimizer, ParamStore, Tensor};
use crate::taggers::pairs::epoch_tiles;
use crate::taggers::threshold::{tune_threshold_with, DecisionRule};
use crate::taggers::{config_hash, gold_labels, warn_if_imbalanced, Method, Scorer, TrainMeta, TrainedTagger};
use crate::train::EpochLog;

pub const EMBEDDING: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiameseConfig {
    pub epochs: usize,
    /// Pairs per step (rounded to a square tile, see [`super::pairs::block_size`]).
    pub batch: usize,
    pub lr: f64,
    pub margin: f64,
    /// Added under the square root of the distance.
    pub lambda: f64,
    pub l2: f64,
    /// Fraction of pair tiles visited per epoch.
    pub pair_subsample: f64,
    pub support_size: usize,
    pub score_beta: f64,
}

impl Default for SiameseConfig {
    fn default() -> Self {
        SiameseConfig {
            epochs: 10,
            batch: 128,
            lr: 1e-4,
            margin: 1.0,
            lambda: DISTANCE_LAMBDA,
            l2: 1e-4,
            pair_subsample: 1.0,
            support_size: 100,
            score_beta: 4.0,
        }
    }
}

pub fn siamese_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Gru { units: 128, return_sequences: true },
        LayerSpec::Gru { units: 128, return_sequences: false },
        LayerSpec::Dense { units: 64, activation: Activation::Relu },
        LayerSpec::Dropout { rate: 0.1 },
        LayerSpec::Dense { units: 32, activation: Activation::Relu },
        LayerSpec::Dropout { rate: 0.1 },
        LayerSpec::Dense { units: EMBEDDING, activation: Activation::Identity },
    ]
}

/// Maps an embedding distance to a dissimilarity in (0, 1):
/// `σ(β (D - m))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreHead {
    pub beta: f64,
    pub margin: f64,
    pub lambda: f64,
}

impl ScoreHead {
    pub fn distance(&self, a: &[f32], b: &[f32]) -> f64 {
        let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        dw_distance(&a, &b, self.lambda).expect("embeddings share a width")
    }

    pub fn score_distance(&self, d: f64) -> f64 {
        sigmoid(self.beta * (d - self.margin))
    }

    pub fn score(&self, a: &[f32], b: &[f32]) -> f64 {
        self.score_distance(self.distance(a, b))
    }

    /// Sum of scores of `emb` against every row of `support`.
    pub fn support_sum(&self, emb: &[f32], support: &Tensor<f32>) -> f64 {
        (0..support.rows()).map(|r| self.score(emb, support.row(r))).sum()
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    specs: &'a [LayerSpec],
    optimizer: &'a Optimizer,
    cfg: &'a SiameseConfig,
}

/// Trains the shared encoder on pairs drawn from `class0 ++ class1`, picks
/// the support set from `class0`, and tunes θ on `dev` support sums.
pub fn train_siamese(
    class0: &[Token],
    class1: &[Token],
    dev: &[Token],
    cfg: &SiameseConfig,
    seed: u64,
) -> Result<(TrainedTagger, Vec<EpochLog>)> {
    if dev.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.batch == 0 || !(cfg.margin > 0.0) || !(cfg.lambda > 0.0) {
        return Err(Error::config("siamese batch, margin and lambda must be positive"));
    }
    let train: Vec<Token> = class0.iter().chain(class1).cloned().collect();
    let labels = gold_labels(&train)?;
    if labels[..class0.len()].iter().any(|&l| l != 0) || labels[class0.len()..].iter().any(|&l| l != 1) {
        return Err(Error::Dataset("siamese classes must hold class-0 then class-1 tokens".into()));
    }
    warn_if_imbalanced("siamese", &labels);
    let dev_labels = gold_labels(dev)?;
    let support: Vec<EncodedWord> = sample_unique(class0.to_vec(), cfg.support_size, seed ^ 0x5119_0001)
        .map_err(|e| Error::Dataset(format!("support set: {e}")))?
        .iter()
        .map(Token::encode)
        .collect();

    let x_all = one_hot::<f32>(&train.iter().map(Token::encode).collect::<Vec<_>>());
    let row = WORD_LEN * SYMBOLS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let specs = siamese_specs();
    let net = Network::build(&[WORD_LEN, SYMBOLS], &specs, &Method::Siamese.param_prefix(), &mut store, &mut rng)?;
    let opt = Optimizer::rmsprop(cfg.lr);
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let tiles = epoch_tiles(&labels, cfg.batch, cfg.pair_subsample, &mut rng)?;
        let (mut total, mut steps) = (0.0, 0usize);
        for tile in &tiles {
            let mut x = Vec::with_capacity(tile.tokens.len() * row);
            for &t in &tile.tokens {
                x.extend_from_slice(&x_all.data()[t * row..(t + 1) * row]);
            }
            let x = Tensor::from_vec(&[tile.tokens.len(), WORD_LEN, SYMBOLS], x)?;
            store.zero_grads();
            let (emb, tape) = net.forward(&store, &x, Mode::Train(&mut rng))?;
            let (loss, demb) = contrastive_batch(&emb, &tile.pairs, cfg.margin, cfg.lambda)?;
            net.backward(&mut store, tape, demb)?;
            let loss = loss + l2_penalty(&mut store, cfg.l2);
            if !loss.is_finite() {
                let norms: Vec<String> =
                    store.params().iter().map(|p| format!("{}={:.3e}", p.name, p.value.sum_of_squares().sqrt())).collect();
                return Err(Error::NonFiniteLoss(format!(
                    "siamese epoch {}, step {steps}; parameter norms {}",
                    epoch + 1,
                    norms.join(", ")
                )));
            }
            opt.step(&mut store)?;
            total += loss;
            steps += 1;
        }
        log.push(EpochLog { model: "siamese".into(), epoch: epoch + 1, loss: total / steps as f64 });
    }

    let head = ScoreHead { beta: cfg.score_beta, margin: cfg.margin, lambda: cfg.lambda };
    let mut tagger = TrainedTagger {
        method: Method::Siamese,
        net,
        store,
        scorer: Scorer::Support { support, head },
        theta: 0.0,
        dev_accuracy: 0.0,
        meta: TrainMeta {
            seed,
            epochs: cfg.epochs,
            config_hash: config_hash(&HashInput { specs: &specs, optimizer: &opt, cfg })?,
            dataset: String::new(),
            train_tokens: train.len(),
        },
    };
    let (theta, acc) = tune_siamese_threshold(&tagger, dev, &dev_labels)?;
    tagger.theta = theta;
    tagger.dev_accuracy = acc;
    Ok((tagger, log))
}

/// Threshold on dev support sums with the `sum <= θ → 0` rule.
pub fn tune_siamese_threshold(tagger: &TrainedTagger, dev: &[Token], labels: &[u8]) -> Result<(f64, f64)> {
    let words: Vec<EncodedWord> = dev.iter().map(Token::encode).collect();
    tune_threshold_with(&tagger.scores(&words)?, labels, DecisionRule::Above)
}

impl TrainedTagger {
    fn head(&self) -> Result<(&[EncodedWord], ScoreHead)> {
        match &self.scorer {
            Scorer::Support { support, head } => Ok((support, *head)),
            Scorer::Sigmoid => Err(Error::config(format!("{} tagger has no embedding head", self.method))),
        }
    }

    /// Embedding distance between two words.
    pub fn distance(&self, a: &EncodedWord, b: &EncodedWord) -> Result<f64> {
        let (_, head) = self.head()?;
        let e = self.outputs(&[*a, *b])?;
        Ok(head.distance(e.row(0), e.row(1)))
    }

    pub fn pair_score(&self, a: &EncodedWord, b: &EncodedWord) -> Result<f64> {
        let (_, head) = self.head()?;
        Ok(head.score_distance(self.distance(a, b)?))
    }

    /// Support-set decision at an explicit θ.
    pub fn siamese_tag(&self, word: &EncodedWord, theta: f64) -> Result<u8> {
        self.head()?;
        Ok(DecisionRule::Above.decide(self.scores(std::slice::from_ref(word))?[0], theta))
    }
}
