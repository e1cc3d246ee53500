//! Sigmoid classifiers over one-hot character sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{one_hot, EncodedWord, Token, SYMBOLS, WORD_LEN};
use crate::error::{Error, Result};
use crate::nn::loss::bce_batch;
use crate::nn::{Activation, LayerSpec, Mode, Network, Optimizer, ParamStore, Tensor};
use crate::taggers::threshold::tune_threshold;
use crate::taggers::{config_hash, gold_labels, warn_if_imbalanced, Method, Scorer, TrainMeta, TrainedTagger};
use crate::train::{shuffled, EpochLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeqConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for SeqConfig {
    fn default() -> Self {
        SeqConfig { epochs: 100, batch: 64, lr: 1e-3 }
    }
}

pub fn baseline_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Lstm { units: 35, return_sequences: true },
        LayerSpec::Lstm { units: 25, return_sequences: false },
        LayerSpec::Dense { units: 1, activation: Activation::Sigmoid },
    ]
}

pub fn conv1d_specs() -> Vec<LayerSpec> {
    let conv = |kernel| LayerSpec::Conv1d { filters: 32, kernel, stride: 1, activation: Activation::Relu };
    vec![
        conv(2),
        LayerSpec::Dropout { rate: 0.2 },
        conv(3),
        LayerSpec::Dropout { rate: 0.2 },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 1, activation: Activation::Sigmoid },
    ]
}

pub fn train_baseline(train: &[Token], dev: &[Token], cfg: &SeqConfig, seed: u64) -> Result<(TrainedTagger, Vec<EpochLog>)> {
    fit(Method::Baseline, baseline_specs(), Optimizer::adam(cfg.lr), train, dev, cfg, seed)
}

pub fn train_conv1d(train: &[Token], dev: &[Token], cfg: &SeqConfig, seed: u64) -> Result<(TrainedTagger, Vec<EpochLog>)> {
    fit(Method::Conv1d, conv1d_specs(), Optimizer::nadam(cfg.lr), train, dev, cfg, seed)
}

/// The baseline recipe on an augmented corpus.
pub fn train_augmented(train: &[Token], dev: &[Token], cfg: &SeqConfig, seed: u64) -> Result<(TrainedTagger, Vec<EpochLog>)> {
    fit(Method::Augment, baseline_specs(), Optimizer::adam(cfg.lr), train, dev, cfg, seed)
}

#[derive(Serialize)]
struct HashInput<'a> {
    specs: &'a [LayerSpec],
    optimizer: &'a Optimizer,
    cfg: &'a SeqConfig,
}

fn fit(
    method: Method,
    specs: Vec<LayerSpec>,
    opt: Optimizer,
    train: &[Token],
    dev: &[Token],
    cfg: &SeqConfig,
    seed: u64,
) -> Result<(TrainedTagger, Vec<EpochLog>)> {
    if train.is_empty() || dev.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.batch == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let labels = gold_labels(train)?;
    warn_if_imbalanced(method.as_str(), &labels);
    let dev_labels = gold_labels(dev)?;
    let words: Vec<EncodedWord> = train.iter().map(Token::encode).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let net = Network::build(&[WORD_LEN, SYMBOLS], &specs, &method.param_prefix(), &mut store, &mut rng)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = shuffled(words.len(), &mut rng);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch) {
            let xb: Vec<EncodedWord> = chunk.iter().map(|&i| words[i]).collect();
            let yb: Vec<f32> = chunk.iter().map(|&i| labels[i] as f32).collect();
            store.zero_grads();
            let (p, tape) = net.forward(&store, &one_hot(&xb), Mode::Train(&mut rng))?;
            let (loss, dp) = bce_batch(&p, &yb)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!("{method}, epoch {}, batch {batches}", epoch + 1)));
            }
            net.backward(&mut store, tape, dp)?;
            opt.step(&mut store)?;
            total += loss;
            batches += 1;
        }
        log.push(EpochLog { model: method.to_string(), epoch: epoch + 1, loss: total / batches as f64 });
    }

    let mut tagger = TrainedTagger {
        method,
        net,
        store,
        scorer: Scorer::Sigmoid,
        theta: 0.5,
        dev_accuracy: 0.0,
        meta: TrainMeta {
            seed,
            epochs: cfg.epochs,
            config_hash: config_hash(&HashInput { specs: &specs, optimizer: &opt, cfg })?,
            dataset: String::new(),
            train_tokens: train.len(),
        },
    };
    let dev_words: Vec<EncodedWord> = dev.iter().map(Token::encode).collect();
    let (theta, acc) = tune_threshold(&tagger.scores(&dev_words)?, &dev_labels)?;
    tagger.theta = theta;
    tagger.dev_accuracy = acc;
    Ok((tagger, log))
}

/// Mean BCE of a sigmoid tagger on labeled tokens.
pub fn mean_bce(tagger: &TrainedTagger, tokens: &[Token]) -> Result<f64> {
    let words: Vec<EncodedWord> = tokens.iter().map(Token::encode).collect();
    let y: Vec<f32> = gold_labels(tokens)?.into_iter().map(f32::from).collect();
    let p: Tensor<f32> = tagger.outputs(&words)?;
    Ok(bce_batch(&p, &y)?.0)
}
