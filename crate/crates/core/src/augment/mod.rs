//! Synthetic training words from a character n-gram model and character
//! LSTMs, started from frequent substrings of the real data.

pub mod lm;
pub mod ngram;
pub mod seeds;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use lm::{CharLm, LmConfig, Sampler};
pub use ngram::{NGramModel, Pick, MAX_GEN_LEN, MIN_GEN_LEN};
pub use seeds::{extract_seeds, SeedSet};

use crate::data::{Label, Token};
use crate::error::{Error, Result};

pub const NGRAM_WORDS: usize = 1500;
pub const LM_WORDS: usize = 1500;
pub const LM_SHIFTS: [usize; 3] = [1, 2, 3];

/// Where an augmented token came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub token: String,
    /// `original`, `ngram`, or `lm1`..`lm3`.
    pub generator: String,
    pub seed: Option<String>,
    #[serde(rename = "L")]
    pub len: Option<usize>,
}

/// The common label of `train`, which must be a single language.
pub fn language_of(train: &[Token]) -> Result<Label> {
    let first = train.first().ok_or(Error::EmptyInput)?.label;
    if first == Label::Universal || train.iter().any(|t| t.label != first) {
        return Err(Error::Dataset("augmentation needs tokens of a single language".into()));
    }
    Ok(first)
}

/// The original tokens followed by 1500 n-gram words and 500 words from each
/// LM shift. Every generated word starts from a uniformly drawn seed and has a
/// uniformly drawn length in [3, 16]. No deduplication.
pub fn augment_dataset<R: Rng + ?Sized>(
    train: &[Token],
    seeds: &SeedSet,
    ngram: &NGramModel,
    lms: &[CharLm],
    rng: &mut R,
) -> Result<(Vec<Token>, Vec<Provenance>)> {
    let label = language_of(train)?;
    if seeds.is_empty() {
        return Err(Error::Dataset("empty seed set".into()));
    }
    let mut shifts: Vec<usize> = lms.iter().map(|m| m.shift).collect();
    shifts.sort_unstable();
    if shifts != LM_SHIFTS {
        return Err(Error::config(format!("expected one LM per shift {LM_SHIFTS:?}, got {shifts:?}")));
    }
    let mut tokens = train.to_vec();
    let mut prov: Vec<Provenance> = train
        .iter()
        .map(|t| Provenance { token: t.surface.clone(), generator: "original".into(), seed: None, len: None })
        .collect();
    let mut push = |word: String, generator: String, seed: &str, len: usize| {
        prov.push(Provenance { token: word.clone(), generator, seed: Some(seed.to_string()), len: Some(len) });
        tokens.push(Token { surface: word, label });
    };
    for _ in 0..NGRAM_WORDS {
        let seed = &seeds.seeds[rng.random_range(0..seeds.len())];
        let len = rng.random_range(MIN_GEN_LEN..=MAX_GEN_LEN);
        push(ngram.generate(seed, len, rng)?, "ngram".into(), seed, len);
    }
    let per_lm = LM_WORDS / LM_SHIFTS.len();
    for &shift in &LM_SHIFTS {
        let lm = lms.iter().find(|m| m.shift == shift).unwrap();
        for _ in 0..per_lm {
            let seed = &seeds.seeds[rng.random_range(0..seeds.len())];
            let len = rng.random_range(MIN_GEN_LEN..=MAX_GEN_LEN);
            let mut sub = ChaCha8Rng::seed_from_u64(rng.random());
            push(lm.generate(seed, len, Sampler::Random(&mut sub))?, format!("lm{shift}"), seed, len);
        }
    }
    Ok((tokens, prov))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token::new(w, Label::English).unwrap()).collect()
    }

    #[test]
    fn mixed_languages_are_rejected() {
        let mut t = toks(&["the", "and"]);
        t.push(Token::new("ami", Label::Indic).unwrap());
        assert!(language_of(&t).is_err());
        assert_eq!(language_of(&t[..2]).unwrap(), Label::English);
    }

    #[test]
    fn composition_and_lengths() {
        let train = toks(&["there", "where", "theme", "other", "hello", "yellow"]);
        let seeds = extract_seeds(&train);
        let ngram = NGramModel::build(&train).unwrap();
        let lms: Vec<CharLm> = LM_SHIFTS.iter().map(|&s| CharLm::new(s, 4, s as u64).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (out, prov) = augment_dataset(&train, &seeds, &ngram, &lms, &mut rng).unwrap();
        assert_eq!(out.len(), train.len() + NGRAM_WORDS + LM_WORDS);
        assert_eq!(prov.len(), out.len());
        assert_eq!(&out[..train.len()], &train[..]);
        let count = |g: &str| prov.iter().filter(|p| p.generator == g).count();
        assert_eq!(count("ngram"), 1500);
        assert_eq!((count("lm1"), count("lm2"), count("lm3")), (500, 500, 500));
        for (t, p) in out.iter().zip(&prov).skip(train.len()) {
            assert!((3..=16).contains(&t.surface.len()));
            assert_eq!(Some(t.surface.len()), p.len);
            let seed = p.seed.as_deref().unwrap();
            assert!(t.surface.starts_with(&seed[..seed.len().min(t.surface.len())]));
            assert_eq!(t.label, Label::English);
        }
        let mut again = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(augment_dataset(&train, &seeds, &ngram, &lms, &mut again).unwrap().0, out);
    }
}
