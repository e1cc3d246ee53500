//! Pair enumeration for the siamese model.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{EncodedWord, Token};
use crate::error::{Error, Result};
use crate::nn::PairIndex;

/// Two words and their dissimilarity: 0 for equal labels, 1 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledPair {
    pub a: EncodedWord,
    pub b: EncodedWord,
    pub y: u8,
}

pub fn dissimilarity(la: u8, lb: u8) -> u8 {
    (la != lb) as u8
}

/// Every unordered pair of distinct entries of `class0 ++ class1`, lazily.
pub fn enumerate_pairs(class0: &[Token], class1: &[Token]) -> PairIter {
    let words = class0
        .iter()
        .map(|t| (t.encode(), 0))
        .chain(class1.iter().map(|t| (t.encode(), 1)))
        .collect();
    PairIter { words, i: 0, j: 1 }
}

/// Row-major walk over the upper triangle.
#[derive(Debug, Clone)]
pub struct PairIter {
    words: Vec<(EncodedWord, u8)>,
    i: usize,
    j: usize,
}

impl Iterator for PairIter {
    type Item = LabeledPair;

    fn next(&mut self) -> Option<LabeledPair> {
        let n = self.words.len();
        if self.j >= n {
            self.i += 1;
            self.j = self.i + 1;
            if self.j >= n {
                return None;
            }
        }
        let ((a, la), (b, lb)) = (self.words[self.i], self.words[self.j]);
        self.j += 1;
        Some(LabeledPair { a, b, y: dissimilarity(la, lb) })
    }
}

/// `n choose 2`.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// A training step's worth of pairs: every cross pair of two blocks of
/// tokens, or every pair inside one block. Embedding the tile's tokens once
/// serves all of its pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    /// Token indices to embed, in row order.
    pub tokens: Vec<usize>,
    /// Pairs as rows of the embedded tile.
    pub pairs: Vec<PairIndex>,
}

/// Side length of a block so that a tile of two blocks holds about `batch` pairs.
pub fn block_size(batch: usize) -> usize {
    ((batch as f64).sqrt().floor() as usize).max(2)
}

/// One epoch of tiles over `labels.len()` tokens. Tokens are shuffled into
/// blocks, each block pair (including a block with itself) becomes a tile,
/// and the tiles are shuffled. With `subsample < 1` only the first
/// `ceil(subsample * tiles)` tiles are kept. At `subsample = 1` every
/// unordered token pair appears exactly once.
pub fn epoch_tiles<R: Rng + ?Sized>(labels: &[u8], batch: usize, subsample: f64, rng: &mut R) -> Result<Vec<Tile>> {
    if !(subsample > 0.0 && subsample <= 1.0) {
        return Err(Error::config(format!("pair subsample must lie in (0, 1], got {subsample}")));
    }
    if labels.len() < 2 {
        return Err(Error::Dataset("need at least two tokens to form pairs".into()));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(rng);
    let blocks: Vec<&[usize]> = order.chunks(block_size(batch)).collect();
    let mut ids: Vec<(usize, usize)> = Vec::new();
    for i in 0..blocks.len() {
        for j in i..blocks.len() {
            if i != j || blocks[i].len() > 1 {
                ids.push((i, j));
            }
        }
    }
    ids.shuffle(rng);
    ids.truncate((subsample * ids.len() as f64).ceil() as usize);
    Ok(ids
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (blocks[i], blocks[j]);
            let mut pairs = Vec::new();
            let tokens: Vec<usize> = if i == j {
                for p in 0..a.len() {
                    for q in p + 1..a.len() {
                        pairs.push(PairIndex { a: p, b: q, y: dissimilarity(labels[a[p]], labels[a[q]]) });
                    }
                }
                a.to_vec()
            } else {
                for p in 0..a.len() {
                    for q in 0..b.len() {
                        let y = dissimilarity(labels[a[p]], labels[b[q]]);
                        pairs.push(PairIndex { a: p, b: a.len() + q, y });
                    }
                }
                a.iter().chain(b).copied().collect()
            };
            Tile { tokens, pairs }
        })
        .collect())
}
