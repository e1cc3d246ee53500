use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::ngram::{check_gen_len, MAX_GEN_LEN};
use crate::data::{letter_index, Token, ALPHABET};
use crate::error::{Error, Result};
use crate::nn::loss::cce_batch;
use crate::nn::{Activation, LayerSpec, Mode, Network, Optimizer, ParamStore, Tensor};
use crate::train::{shuffled, EpochLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { hidden: 200, epochs: 50, batch: 32, lr: 1e-3 }
    }
}

/// How the next character is drawn from the predicted distribution.
pub enum Sampler<'a> {
    /// Sample at temperature 1.
    Random(&'a mut dyn RngCore),
    /// Most probable character; ties go to the earlier letter.
    Greedy,
}

/// A character LSTM trained to predict the letter `shift` positions ahead.
#[derive(Debug, Clone)]
pub struct CharLm {
    pub shift: usize,
    pub net: Network,
    pub store: ParamStore<f32>,
}

pub fn lm_specs(hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Lstm { units: hidden, return_sequences: true },
        LayerSpec::Dense { units: ALPHABET, activation: Activation::Softmax },
    ]
}

fn letters(s: &str) -> Vec<u8> {
    s.chars().filter_map(letter_index).map(|i| i - 1).take(MAX_GEN_LEN).collect()
}

/// `[n, steps, 26]` one-hot; positions past a word's end stay zero.
fn one_hot_letters(words: &[&[u8]], steps: usize) -> Tensor<f32> {
    let mut x = Tensor::zeros(&[words.len(), steps, ALPHABET]);
    let d = x.data_mut();
    for (n, w) in words.iter().enumerate() {
        for (t, &c) in w.iter().take(steps).enumerate() {
            d[(n * steps + t) * ALPHABET + c as usize] = 1.0;
        }
    }
    x
}

/// Shifted targets per position, `None` where there is nothing to predict.
fn shifted_targets(words: &[&[u8]], steps: usize, shift: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; words.len() * steps];
    for (n, w) in words.iter().enumerate() {
        for t in 0..w.len().saturating_sub(shift) {
            out[n * steps + t] = Some(w[t + shift] as usize);
        }
    }
    out
}

impl CharLm {
    pub fn new(shift: usize, hidden: usize, seed: u64) -> Result<Self> {
        if !(1..=3).contains(&shift) {
            return Err(Error::config(format!("shift {shift} outside 1..=3")));
        }
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::build(&[MAX_GEN_LEN, ALPHABET], &lm_specs(hidden), "lm.", &mut store, &mut rng)?;
        Ok(CharLm { shift, net, store })
    }

    /// Trains with RMSprop on (word, word shifted by `shift`) pairs. Words no
    /// longer than the shift have no targets and are skipped.
    pub fn train(tokens: &[Token], shift: usize, cfg: &LmConfig, seed: u64) -> Result<(Self, Vec<EpochLog>)> {
        let mut lm = CharLm::new(shift, cfg.hidden, seed)?;
        let words: Vec<Vec<u8>> = tokens.iter().map(|t| letters(&t.surface)).filter(|w| w.len() > shift).collect();
        if words.is_empty() {
            return Err(Error::Dataset(format!("no token longer than the shift {shift}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
        let opt = Optimizer::rmsprop(cfg.lr);
        let mut log = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let order = shuffled(words.len(), &mut rng);
            let (mut total, mut batches) = (0.0, 0usize);
            for chunk in order.chunks(cfg.batch.max(1)) {
                let batch: Vec<&[u8]> = chunk.iter().map(|&i| words[i].as_slice()).collect();
                let steps = batch.iter().map(|w| w.len()).max().unwrap();
                let x = one_hot_letters(&batch, steps);
                let targets = shifted_targets(&batch, steps, shift);
                lm.store.zero_grads();
                let (p, tape) = lm.net.forward(&lm.store, &x, Mode::Train(&mut rng))?;
                let (loss, dp) = cce_batch(&p, &targets)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss(format!("char lm shift {shift}, epoch {epoch}")));
                }
                lm.net.backward(&mut lm.store, tape, dp)?;
                opt.step(&mut lm.store)?;
                total += loss;
                batches += 1;
            }
            log.push(EpochLog { model: format!("lm{shift}"), epoch: epoch + 1, loss: total / batches as f64 });
        }
        Ok((lm, log))
    }

    /// Mean masked cross-entropy over `tokens` with the current weights.
    pub fn mean_loss(&self, tokens: &[Token]) -> Result<f64> {
        let words: Vec<Vec<u8>> = tokens.iter().map(|t| letters(&t.surface)).filter(|w| w.len() > self.shift).collect();
        if words.is_empty() {
            return Err(Error::EmptyInput);
        }
        let batch: Vec<&[u8]> = words.iter().map(Vec::as_slice).collect();
        let steps = batch.iter().map(|w| w.len()).max().unwrap();
        let p = self.net.predict(&self.store, &one_hot_letters(&batch, steps))?;
        Ok(cce_batch(&p, &shifted_targets(&batch, steps, self.shift))?.0)
    }

    /// Distribution over the letter that follows `prefix`. The output at
    /// position `len - shift` is the one aligned with the next letter; for a
    /// prefix shorter than the shift the first position is used.
    pub fn next_distribution(&self, prefix: &[u8]) -> Result<Vec<f32>> {
        if prefix.is_empty() {
            return Err(Error::EmptyInput);
        }
        let pos = prefix.len().saturating_sub(self.shift);
        let x = one_hot_letters(&[&prefix[..=pos]], pos + 1);
        let p = self.net.predict(&self.store, &x)?;
        Ok(p.row(pos).to_vec())
    }

    /// Feeds `seed` through the model and extends it letter by letter,
    /// feeding each choice back, until it is `len` long (longer seeds are trimmed).
    pub fn generate(&self, seed: &str, len: usize, mut sampler: Sampler<'_>) -> Result<String> {
        check_gen_len(len)?;
        let mut w = letters(seed);
        if w.is_empty() || w.len() != seed.len() {
            return Err(Error::config(format!("seed {seed:?} must be non-empty a..z")));
        }
        w.truncate(len);
        while w.len() < len {
            let p = self.next_distribution(&w)?;
            let c = match sampler {
                Sampler::Greedy => argmax(&p),
                Sampler::Random(ref mut rng) => WeightedIndex::new(&p)
                    .map_err(|e| Error::NonFiniteLoss(format!("lm distribution: {e}")))?
                    .sample(&mut **rng),
            };
            w.push(c as u8);
        }
        Ok(w.iter().map(|&c| (b'a' + c) as char).collect())
    }
}

fn argmax(p: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;

    #[test]
    fn targets_are_shifted_and_masked() {
        let w: Vec<u8> = vec![0, 1, 2, 3];
        let short: Vec<u8> = vec![4, 5];
        let t = shifted_targets(&[&w, &short], 4, 2);
        assert_eq!(t, vec![Some(2), Some(3), None, None, None, None, None, None]);
    }

    #[test]
    fn rejects_bad_shift_and_empty_data() {
        assert!(CharLm::new(0, 4, 0).is_err());
        assert!(CharLm::new(4, 4, 0).is_err());
        let toks = vec![Token::new("ab", Label::Indic).unwrap()];
        let cfg = LmConfig { hidden: 4, epochs: 1, batch: 2, lr: 1e-3 };
        assert!(matches!(CharLm::train(&toks, 2, &cfg, 0), Err(Error::Dataset(_))));
    }

    #[test]
    fn untrained_model_is_near_uniform() {
        let lm = CharLm::new(1, 8, 3).unwrap();
        let toks = vec![Token::new("kemon", Label::Indic).unwrap()];
        let l = lm.mean_loss(&toks).unwrap();
        assert!((l - (ALPHABET as f64).ln()).abs() < 0.1, "{l}");
    }

    #[test]
    fn generation_contract() {
        let lm = CharLm::new(2, 8, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for len in 3..=16 {
            let w = lm.generate("k", len, Sampler::Random(&mut rng)).unwrap();
            assert_eq!(w.len(), len);
            assert!(w.starts_with('k') && w.chars().all(|c| c.is_ascii_lowercase()));
        }
        assert_eq!(lm.generate("abcdef", 4, Sampler::Greedy).unwrap(), "abcd");
        assert!(lm.generate("a1", 4, Sampler::Greedy).is_err());
        assert!(lm.generate("a", 17, Sampler::Greedy).is_err());
    }
}
