//! Synthetic Roman-alphabet word generators for offline experiments.
//!
//! `IndicLike` builds open consonant-vowel syllables with aspirated onsets
//! (kh, bh, chh, ...) the way transliterated Bengali/Hindi tends to look;
//! `EnglishLike` uses consonant clusters, closed syllables and common English
//! suffixes. Their inventories overlap, so the task is not trivially
//! separable. `LowHalf`/`HighHalf` draw from the disjoint alphabets a..m and
//! n..z and are perfectly separable.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthLanguage {
    IndicLike,
    EnglishLike,
    LowHalf,
    HighHalf,
}

impl std::str::FromStr for SynthLanguage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indic-like" => Ok(SynthLanguage::IndicLike),
            "english-like" => Ok(SynthLanguage::EnglishLike),
            "low-half" => Ok(SynthLanguage::LowHalf),
            "high-half" => Ok(SynthLanguage::HighHalf),
            _ => Err(Error::config(format!("unknown synthetic language {s:?}"))),
        }
    }
}

struct Inventory {
    items: &'static [(&'static str, u32)],
    dist: WeightedIndex<u32>,
}

impl Inventory {
    fn new(items: &'static [(&'static str, u32)]) -> Self {
        let dist = WeightedIndex::new(items.iter().map(|i| i.1)).expect("positive weights");
        Inventory { items, dist }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> &'static str {
        self.items[self.dist.sample(rng)].0
    }
}

const INDIC_ONSETS: &[(&str, u32)] = &[
    ("k", 8), ("kh", 4), ("g", 5), ("gh", 2), ("ch", 5), ("chh", 2), ("j", 5), ("jh", 1),
    ("t", 7), ("th", 4), ("d", 5), ("dh", 3), ("n", 6), ("p", 5), ("ph", 1), ("b", 6),
    ("bh", 4), ("m", 6), ("r", 7), ("l", 5), ("sh", 4), ("s", 5), ("h", 4), ("y", 2),
    ("", 5),
];
const INDIC_VOWELS: &[(&str, u32)] = &[
    ("a", 20), ("aa", 4), ("i", 9), ("ee", 3), ("u", 6), ("oo", 2), ("e", 8), ("o", 9),
    ("ai", 2), ("au", 1),
];
const INDIC_CODAS: &[(&str, u32)] = &[("", 30), ("n", 4), ("m", 2), ("r", 3), ("k", 1), ("l", 1)];
const INDIC_ENDINGS: &[(&str, u32)] = &[
    ("", 30), ("o", 3), ("e", 3), ("i", 3), ("te", 2), ("ke", 2), ("chhe", 2), ("lam", 1),
    ("bo", 1), ("na", 2), ("ta", 1), ("hai", 1), ("ri", 1),
];

const ENGLISH_ONSETS: &[(&str, u32)] = &[
    ("", 6), ("b", 4), ("c", 5), ("d", 4), ("f", 3), ("g", 2), ("h", 3), ("l", 4), ("m", 4),
    ("n", 3), ("p", 4), ("r", 4), ("s", 5), ("t", 5), ("w", 3), ("v", 1), ("y", 1),
    ("bl", 1), ("br", 1), ("cl", 1), ("cr", 1), ("dr", 1), ("fl", 1), ("fr", 1), ("gr", 1),
    ("pl", 1), ("pr", 2), ("sc", 1), ("sk", 1), ("sl", 1), ("sp", 1), ("st", 2), ("str", 1),
    ("th", 4), ("tr", 1), ("wh", 1), ("sh", 1), ("ch", 1), ("qu", 1),
];
const ENGLISH_VOWELS: &[(&str, u32)] = &[
    ("a", 9), ("e", 12), ("i", 8), ("o", 8), ("u", 4), ("ea", 2), ("ee", 1), ("oo", 1),
    ("ou", 2), ("ai", 1), ("y", 1), ("ie", 1),
];
const ENGLISH_CODAS: &[(&str, u32)] = &[
    ("", 8), ("t", 5), ("d", 3), ("n", 5), ("s", 3), ("r", 5), ("l", 3), ("st", 2), ("nd", 2),
    ("ng", 2), ("nk", 1), ("ck", 2), ("ll", 2), ("ss", 1), ("th", 1), ("sh", 1), ("rt", 1),
    ("ght", 1), ("x", 1), ("ve", 2), ("ke", 1), ("te", 1),
];
const ENGLISH_ENDINGS: &[(&str, u32)] = &[
    ("", 24), ("ing", 4), ("ed", 4), ("er", 4), ("ly", 3), ("tion", 2), ("s", 5), ("es", 2),
    ("ness", 1), ("ment", 1), ("able", 1), ("est", 1), ("ful", 1), ("y", 2),
];

struct SyllableModel {
    onsets: Inventory,
    vowels: Inventory,
    codas: Inventory,
    endings: Inventory,
    syllables: [u32; 4],
}

impl SyllableModel {
    fn for_language(lang: SynthLanguage) -> Option<Self> {
        match lang {
            SynthLanguage::IndicLike => Some(SyllableModel {
                onsets: Inventory::new(INDIC_ONSETS),
                vowels: Inventory::new(INDIC_VOWELS),
                codas: Inventory::new(INDIC_CODAS),
                endings: Inventory::new(INDIC_ENDINGS),
                syllables: [3, 6, 4, 1],
            }),
            SynthLanguage::EnglishLike => Some(SyllableModel {
                onsets: Inventory::new(ENGLISH_ONSETS),
                vowels: Inventory::new(ENGLISH_VOWELS),
                codas: Inventory::new(ENGLISH_CODAS),
                endings: Inventory::new(ENGLISH_ENDINGS),
                syllables: [6, 5, 2, 1],
            }),
            _ => None,
        }
    }

    fn word<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        let n = WeightedIndex::new(self.syllables).unwrap().sample(rng) + 1;
        let mut w = String::new();
        for _ in 0..n {
            w.push_str(self.onsets.draw(rng));
            w.push_str(self.vowels.draw(rng));
            w.push_str(self.codas.draw(rng));
        }
        w.push_str(self.endings.draw(rng));
        w
    }
}

fn half_alphabet_word<R: Rng + ?Sized>(rng: &mut R, low: bool) -> String {
    let base = if low { b'a' } else { b'n' };
    let len = rng.random_range(3..=10);
    (0..len).map(|_| (base + rng.random_range(0..13u8)) as char).collect()
}

/// `n` distinct words, deterministic per seed.
pub fn generate_words(lang: SynthLanguage, n: usize, seed: u64) -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = SyllableModel::for_language(lang);
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > n.saturating_mul(50).max(1000) {
            return Err(Error::Dataset(format!("could only generate {} distinct {lang:?} words", out.len())));
        }
        let w = match &model {
            Some(m) => m.word(&mut rng),
            None => half_alphabet_word(&mut rng, lang == SynthLanguage::LowHalf),
        };
        if w.len() < 2 {
            continue;
        }
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    Ok(out)
}
