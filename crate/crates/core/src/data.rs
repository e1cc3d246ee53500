//! Tokens, fixed-length character encoding, corpus files and splits.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Character positions per word.
pub const WORD_LEN: usize = 15;
/// Letters a..z.
pub const ALPHABET: usize = 26;
/// Letters plus the padding symbol.
pub const SYMBOLS: usize = ALPHABET + 1;

pub const TRAIN_BATCHES: usize = 4;
pub const PART_SIZE: usize = 1000;
pub const SPLIT_TOTAL: usize = (TRAIN_BATCHES + 2) * PART_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Bengali or Hindi, written in Roman script (class 0).
    #[serde(rename = "0")]
    Indic,
    /// English (class 1, the positive class).
    #[serde(rename = "1")]
    English,
    /// Named entities, numbers, punctuation and anything else.
    #[serde(rename = "U")]
    Universal,
}

impl Label {
    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "0" => Some(Label::Indic),
            "1" => Some(Label::English),
            "U" | "u" => Some(Label::Universal),
            _ => None,
        }
    }

    pub fn from_class(c: u8) -> Option<Label> {
        match c {
            0 => Some(Label::Indic),
            1 => Some(Label::English),
            _ => None,
        }
    }

    /// Binary class for the two languages, `None` for `U`.
    pub fn class(self) -> Option<u8> {
        match self {
            Label::Indic => Some(0),
            Label::English => Some(1),
            Label::Universal => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Indic => "0",
            Label::English => "1",
            Label::Universal => "U",
        })
    }
}

/// A labeled token. For language labels the surface is normalized (non-empty,
/// a..z only); `U` tokens keep their raw text when nothing survives normalization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub label: Label,
}

impl Token {
    pub fn new(raw: &str, label: Label) -> Result<Token> {
        match (normalize_token(raw), label) {
            (Ok(surface), _) => Ok(Token { surface, label }),
            (Err(_), Label::Universal) if !raw.trim().is_empty() => {
                Ok(Token { surface: raw.trim().to_string(), label })
            }
            (Err(e), _) => Err(e),
        }
    }

    pub fn encode(&self) -> EncodedWord {
        encode_word(&self.surface)
    }
}

/// Lowercases and drops everything outside a..z.
pub fn normalize_token(raw: &str) -> Result<String> {
    let s: String = raw
        .chars()
        .flat_map(char::to_lowercase)
        .filter(char::is_ascii_lowercase)
        .collect();
    if s.is_empty() {
        return Err(Error::EmptyToken(raw.to_string()));
    }
    Ok(s)
}

/// Letter index in 1..=26, or `None` outside a..z.
pub fn letter_index(c: char) -> Option<u8> {
    c.is_ascii_lowercase().then(|| c as u8 - b'a' + 1)
}

/// Fifteen symbol indices: 0 is padding, 1..=26 are a..z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct EncodedWord([u8; WORD_LEN]);

impl From<EncodedWord> for String {
    fn from(w: EncodedWord) -> String {
        w.decode()
    }
}

impl TryFrom<String> for EncodedWord {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s.is_empty() || s.len() > WORD_LEN || !s.chars().all(|c| c.is_ascii_lowercase()) {
            return Err(Error::Dataset(format!("{s:?} is not an encoded word")));
        }
        Ok(encode_word(&s))
    }
}

impl EncodedWord {
    pub fn from_indices(indices: [u8; WORD_LEN]) -> Result<Self> {
        let mut seen_pad = false;
        for &i in &indices {
            if i as usize > ALPHABET {
                return Err(Error::Dataset(format!("symbol index {i} out of range")));
            }
            if i == 0 {
                seen_pad = true;
            } else if seen_pad {
                return Err(Error::Dataset("symbol after padding".into()));
            }
        }
        Ok(EncodedWord(indices))
    }

    pub fn indices(&self) -> &[u8; WORD_LEN] {
        &self.0
    }

    /// Number of non-pad positions.
    pub fn len(&self) -> usize {
        self.0.iter().take_while(|&&i| i != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.0[0] == 0
    }

    pub fn decode(&self) -> String {
        self.0
            .iter()
            .take_while(|&&i| i != 0)
            .map(|&i| (b'a' + i - 1) as char)
            .collect()
    }
}

/// Maps the first 15 letters to 1..=26 and right-pads with 0. Characters
/// outside a..z are skipped, so callers normally normalize first.
pub fn encode_word(surface: &str) -> EncodedWord {
    let mut out = [0u8; WORD_LEN];
    for (slot, i) in out.iter_mut().zip(surface.chars().filter_map(letter_index)) {
        *slot = i;
    }
    EncodedWord(out)
}

/// `[n, 15, 27]` one-hot batch; padding is symbol 0.
pub fn one_hot<T: Scalar>(words: &[EncodedWord]) -> Tensor<T> {
    let mut t = Tensor::zeros(&[words.len(), WORD_LEN, SYMBOLS]);
    let d = t.data_mut();
    for (n, w) in words.iter().enumerate() {
        for (p, &i) in w.0.iter().enumerate() {
            d[(n * WORD_LEN + p) * SYMBOLS + i as usize] = T::one();
        }
    }
    t
}

/// Four training batches plus dev and test, all from one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train_batches: Vec<Vec<Token>>,
    pub dev: Vec<Token>,
    pub test: Vec<Token>,
}

impl DatasetSplit {
    /// Parts in file order: train0..train3, dev, test.
    pub fn parts(&self) -> Vec<(String, &[Token])> {
        let mut v: Vec<(String, &[Token])> = self
            .train_batches
            .iter()
            .enumerate()
            .map(|(i, b)| (format!("train{i}"), b.as_slice()))
            .collect();
        v.push(("dev".into(), &self.dev));
        v.push(("test".into(), &self.test));
        v
    }
}

fn check_unique(tokens: &[Token]) -> Result<()> {
    let mut seen = HashSet::new();
    for t in tokens {
        if !seen.insert(t.surface.as_str()) {
            return Err(Error::Dataset(format!("duplicate token {:?}", t.surface)));
        }
    }
    Ok(())
}

/// Seeded shuffle, then 4x1000 train, 1000 dev, 1000 test.
pub fn split_dataset(tokens: &[Token], seed: u64) -> Result<DatasetSplit> {
    if tokens.len() != SPLIT_TOTAL {
        return Err(Error::Dataset(format!(
            "split needs exactly {SPLIT_TOTAL} unique tokens, got {}",
            tokens.len()
        )));
    }
    check_unique(tokens)?;
    let mut shuffled = tokens.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chunks = shuffled.chunks(PART_SIZE).map(<[Token]>::to_vec);
    let train_batches = chunks.by_ref().take(TRAIN_BATCHES).collect();
    let dev = chunks.next().unwrap();
    let test = chunks.next().unwrap();
    Ok(DatasetSplit { train_batches, dev, test })
}

/// Drops repeated surfaces, keeping the first occurrence.
pub fn dedup(tokens: Vec<Token>) -> Vec<Token> {
    let mut seen = HashSet::new();
    tokens.into_iter().filter(|t| seen.insert(t.surface.clone())).collect()
}

/// Picks `n` unique tokens with a seeded shuffle, reporting any shortfall.
pub fn sample_unique(tokens: Vec<Token>, n: usize, seed: u64) -> Result<Vec<Token>> {
    let mut unique = dedup(tokens);
    if unique.len() < n {
        return Err(Error::Dataset(format!(
            "need {n} unique tokens, found {} ({} short)",
            unique.len(),
            n - unique.len()
        )));
    }
    unique.sort_by(|a, b| a.surface.cmp(&b.surface));
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    unique.truncate(n);
    Ok(unique)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// One raw token per line, all with the same label. Blank lines are skipped.
pub fn load_wordlist(path: &Path, label: Label) -> Result<Vec<Token>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(Token::new(line.trim(), label).map_err(|e| parse_err(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

fn parse_labeled_line(path: &Path, lineno: usize, line: &str, allow_u: bool) -> Result<Token> {
    let (raw, label) = line
        .rsplit_once('\t')
        .ok_or_else(|| parse_err(path, lineno, "expected `token<TAB>label`"))?;
    let label = Label::parse(label.trim())
        .filter(|l| allow_u || *l != Label::Universal)
        .ok_or_else(|| parse_err(path, lineno, format!("unknown label {:?}", label.trim())))?;
    Token::new(raw, label).map_err(|e| parse_err(path, lineno, e.to_string()))
}

/// `token<TAB>label` lines with label 0 or 1.
pub fn load_labeled(path: &Path) -> Result<Vec<Token>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_labeled_line(path, i + 1, line, false)?);
    }
    Ok(out)
}

pub fn write_labeled(path: &Path, tokens: &[Token]) -> Result<()> {
    let mut s = String::with_capacity(tokens.len() * 10);
    for t in tokens {
        s.push_str(&t.surface);
        s.push('\t');
        s.push_str(&t.label.to_string());
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// An utterance: tokens in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub tokens: Vec<Token>,
}

/// CoNLL-like file: `token<TAB>label` per line (label 0, 1 or U), blank
/// lines between instances.
pub fn load_instances(path: &Path) -> Result<Vec<Instance>> {
    let text = read(path)?;
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(Instance { tokens: std::mem::take(&mut current) });
            }
            continue;
        }
        current.push(parse_labeled_line(path, i + 1, line, true)?);
    }
    if !current.is_empty() {
        out.push(Instance { tokens: current });
    }
    if out.is_empty() {
        return Err(parse_err(path, 0, "no instances"));
    }
    Ok(out)
}

/// Utterance-level code-mixing index in [0, 100]:
/// `100 * (1 - max_lang / (n - u))`, or 0 when every token is `U`.
pub fn code_mixing_index(inst: &Instance) -> f64 {
    let n = inst.tokens.len();
    let mut counts = [0usize; 2];
    for t in &inst.tokens {
        if let Some(c) = t.label.class() {
            counts[c as usize] += 1;
        }
    }
    let tagged = counts[0] + counts[1];
    if tagged == 0 {
        return 0.0;
    }
    debug_assert!(tagged <= n);
    100.0 * (1.0 - counts[0].max(counts[1]) as f64 / tagged as f64)
}
