use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{letter_index, Token, ALPHABET};
use crate::error::{Error, Result};

/// Start-of-word padding symbol in contexts.
pub const START: char = '^';
/// Longest context (two characters, i.e. trigrams).
pub const MAX_CONTEXT: usize = 2;

pub const MIN_GEN_LEN: usize = 3;
pub const MAX_GEN_LEN: usize = 16;

pub(crate) fn check_gen_len(len: usize) -> Result<()> {
    if !(MIN_GEN_LEN..=MAX_GEN_LEN).contains(&len) {
        return Err(Error::config(format!(
            "generation length {len} outside [{MIN_GEN_LEN}, {MAX_GEN_LEN}]"
        )));
    }
    Ok(())
}

/// Which candidate to emit from a conditional distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    Argmax,
    /// Second most frequent; falls back to the argmax when only one character was seen.
    SecondMax,
}

/// Character counts for every context of length 0, 1 and 2. Each token is
/// prefixed with two start symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramModel {
    counts: BTreeMap<String, [u32; ALPHABET]>,
}

impl NGramModel {
    pub fn build(tokens: &[Token]) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut counts: BTreeMap<String, [u32; ALPHABET]> = BTreeMap::new();
        for t in tokens {
            let padded: Vec<char> = std::iter::repeat_n(START, MAX_CONTEXT).chain(t.surface.chars()).collect();
            for i in MAX_CONTEXT..padded.len() {
                let c = letter_index(padded[i])
                    .ok_or_else(|| Error::Dataset(format!("token {:?} is not normalized", t.surface)))?;
                for k in 0..=MAX_CONTEXT {
                    let ctx: String = padded[i - k..i].iter().collect();
                    counts.entry(ctx).or_insert([0; ALPHABET])[c as usize - 1] += 1;
                }
            }
        }
        Ok(NGramModel { counts })
    }

    /// Next-character counts after `context`, if it was seen.
    pub fn counts(&self, context: &str) -> Option<&[u32; ALPHABET]> {
        self.counts.get(context)
    }

    /// All contexts seen in training.
    pub fn contexts(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    /// `C(context, c) / C(context)`.
    pub fn prob(&self, context: &str, c: char) -> Result<f64> {
        if context.chars().count() > MAX_CONTEXT {
            return Err(Error::config(format!("context {context:?} longer than {MAX_CONTEXT}")));
        }
        let i = letter_index(c).ok_or_else(|| Error::config(format!("{c:?} is not a letter")))?;
        let row = self.counts.get(context).ok_or_else(|| Error::UnseenContext(context.to_string()))?;
        let total: u32 = row.iter().sum();
        Ok(row[i as usize - 1] as f64 / total as f64)
    }

    /// One generation step of the given order (1 = unigram .. 3 = trigram) from
    /// `history`, which already carries its start symbols. Unseen contexts back
    /// off to the next lower order.
    pub fn next_char(&self, history: &[char], order: usize, pick: Pick) -> char {
        let mut k = order.clamp(1, MAX_CONTEXT + 1) - 1;
        loop {
            let ctx: String = history[history.len() - k..].iter().collect();
            if let Some(row) = self.counts.get(&ctx) {
                return (b'a' + ranked(row, pick) as u8) as char;
            }
            // The empty context is always present for a non-empty corpus.
            k -= 1;
        }
    }

    /// Extends `seed` to exactly `len` characters (or trims it), choosing the
    /// order and pick for every step with `choose`.
    pub fn generate_with(
        &self,
        seed: &str,
        len: usize,
        mut choose: impl FnMut() -> (usize, Pick),
    ) -> Result<String> {
        check_gen_len(len)?;
        if seed.is_empty() || !seed.chars().all(|c| c.is_ascii_lowercase()) {
            return Err(Error::config(format!("seed {seed:?} must be non-empty a..z")));
        }
        let mut history: Vec<char> = std::iter::repeat_n(START, MAX_CONTEXT).chain(seed.chars()).collect();
        history.truncate(MAX_CONTEXT + len);
        while history.len() < MAX_CONTEXT + len {
            let (order, pick) = choose();
            let c = self.next_char(&history, order, pick);
            history.push(c);
        }
        Ok(history[MAX_CONTEXT..].iter().collect())
    }

    /// Uniform order in {1, 2, 3} and a fair coin between argmax and second max.
    pub fn generate<R: Rng + ?Sized>(&self, seed: &str, len: usize, rng: &mut R) -> Result<String> {
        self.generate_with(seed, len, || {
            let order = rng.random_range(1..=MAX_CONTEXT + 1);
            let pick = if rng.random_bool(0.5) { Pick::Argmax } else { Pick::SecondMax };
            (order, pick)
        })
    }
}

/// Index of the most (or second most) frequent character; ties go to the
/// earlier letter.
fn ranked(row: &[u32; ALPHABET], pick: Pick) -> usize {
    let mut order: Vec<usize> = (0..ALPHABET).filter(|&i| row[i] > 0).collect();
    order.sort_by(|&a, &b| row[b].cmp(&row[a]).then(a.cmp(&b)));
    match pick {
        Pick::SecondMax if order.len() > 1 => order[1],
        _ => order[0],
    }
}
