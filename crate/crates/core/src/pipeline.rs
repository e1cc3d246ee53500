//! End-to-end steps shared by the command line and the experiment harness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_dataset, extract_seeds, language_of, CharLm, LmConfig, NGramModel, Provenance, LM_SHIFTS};
use crate::data::{Label, Token};
use crate::error::{Error, Result};
use crate::taggers::{train_augmented, train_baseline, train_conv1d, train_siamese, Method, SeqConfig, SiameseConfig, TrainedTagger};
use crate::train::EpochLog;

/// Hyperparameters of every method.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodConfigs {
    pub baseline: SeqConfig,
    pub conv1d: SeqConfig,
    pub lm: LmConfig,
    pub siamese: SiameseConfig,
}

/// One training batch of both languages plus shared dev data.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub train0: &'a [Token],
    pub train1: &'a [Token],
    /// Augmented corpora, required by [`Method::Augment`].
    pub augmented: Option<(&'a [Token], &'a [Token])>,
    pub dev: &'a [Token],
}

/// Output of augmenting one language.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub tokens: Vec<Token>,
    pub provenance: Vec<Provenance>,
    pub lm_logs: Vec<EpochLog>,
}

/// Seeds, n-gram model and one LM per shift from `train`, then the
/// augmented corpus. LM `k` is initialised from `seed + k`.
pub fn augment_language(train: &[Token], lm: &LmConfig, seed: u64) -> Result<Augmented> {
    language_of(train)?;
    let seeds = extract_seeds(train);
    let ngram = NGramModel::build(train)?;
    let mut lms = Vec::with_capacity(LM_SHIFTS.len());
    let mut lm_logs = Vec::new();
    for shift in LM_SHIFTS {
        let (m, log) = CharLm::train(train, shift, lm, seed.wrapping_add(shift as u64))?;
        lms.push(m);
        lm_logs.extend(log);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tokens, provenance) = augment_dataset(train, &seeds, &ngram, &lms, &mut rng)?;
    Ok(Augmented { tokens, provenance, lm_logs })
}

fn joined(a: &[Token], b: &[Token]) -> Vec<Token> {
    a.iter().chain(b).cloned().collect()
}

fn check_language(tokens: &[Token], want: Label, what: &str) -> Result<()> {
    if tokens.iter().any(|t| t.label != want) {
        return Err(Error::Dataset(format!("{what} must contain only label {want} tokens")));
    }
    Ok(())
}

pub fn train_method(
    method: Method,
    data: &TrainingData<'_>,
    cfg: &MethodConfigs,
    seed: u64,
) -> Result<(TrainedTagger, Vec<EpochLog>)> {
    check_language(data.train0, Label::Indic, "class-0 training data")?;
    check_language(data.train1, Label::English, "class-1 training data")?;
    let (mut tagger, log) = match method {
        Method::Baseline => train_baseline(&joined(data.train0, data.train1), data.dev, &cfg.baseline, seed)?,
        Method::Conv1d => train_conv1d(&joined(data.train0, data.train1), data.dev, &cfg.conv1d, seed)?,
        Method::Augment => {
            let (a0, a1) = data.augmented.ok_or_else(|| Error::config("augment needs augmented corpora"))?;
            check_language(a0, Label::Indic, "class-0 augmented data")?;
            check_language(a1, Label::English, "class-1 augmented data")?;
            train_augmented(&joined(a0, a1), data.dev, &cfg.baseline, seed)?
        }
        Method::Siamese => train_siamese(data.train0, data.train1, data.dev, &cfg.siamese, seed)?,
    };
    tagger.meta.dataset = if method == Method::Augment { "augmented".into() } else { "original".into() };
    Ok((tagger, log))
}
