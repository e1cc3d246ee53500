use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::Token;

/// Seeds wanted per substring length.
pub const SEED_QUOTAS: [(usize, usize); 3] = [(2, 100), (3, 300), (4, 600)];

/// Frequent substrings used to start generated words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub seeds: Vec<String>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    /// Number of seeds of each length, as `(length, count)` sorted by length.
    pub fn composition(&self) -> Vec<(usize, usize)> {
        let mut m: HashMap<usize, usize> = HashMap::new();
        for s in &self.seeds {
            *m.entry(s.len()).or_default() += 1;
        }
        let mut v: Vec<_> = m.into_iter().collect();
        v.sort();
        v
    }
}

/// Substrings of length `k` ranked by overlapping occurrence count over all
/// tokens, descending, ties in lexicographic order.
pub fn ranked_substrings(tokens: &[Token], k: usize) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        let s = t.surface.as_str();
        if s.len() >= k {
            for i in 0..=s.len() - k {
                *counts.entry(&s[i..i + k]).or_default() += 1;
            }
        }
    }
    let mut v: Vec<(String, usize)> = counts.into_iter().map(|(s, c)| (s.to_string(), c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Top 100 bigrams, 300 trigrams and 600 quadgrams. A shortfall at one length
/// is filled from the unused part of the next shorter length's ranking (and
/// further down if that runs dry too).
pub fn extract_seeds(tokens: &[Token]) -> SeedSet {
    let max_len = SEED_QUOTAS.iter().map(|q| q.0).max().unwrap();
    // rankings[k] with a cursor of how many have been taken.
    let mut rankings: Vec<(Vec<String>, usize)> = (0..=max_len)
        .map(|k| {
            let r = if k == 0 { Vec::new() } else { ranked_substrings(tokens, k) };
            (r.into_iter().map(|(s, _)| s).collect(), 0)
        })
        .collect();
    let mut seeds = Vec::new();
    for &(len, quota) in &SEED_QUOTAS {
        let mut need = quota;
        let mut k = len;
        while need > 0 && k > 0 {
            let (ranking, cursor) = &mut rankings[k];
            let take = need.min(ranking.len() - *cursor);
            seeds.extend_from_slice(&ranking[*cursor..*cursor + take]);
            *cursor += take;
            need -= take;
            k -= 1;
        }
    }
    SeedSet { seeds }
}
