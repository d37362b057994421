//! Semantic similarity over character bigrams and demonstration selection.
//!
//! Texts are vectorized as sparse character-bigram term-frequency vectors;
//! bigrams suit unsegmented text and need no external model. Similarity is
//! cosine over those count vectors. Single-character texts fall back to a
//! unigram vector so they still have a nonzero norm.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{Sample, SlmPrediction};

/// Marker for unigram fallback keys; never a valid `char` codepoint.
const UNIGRAM_MARK: u64 = u32::MAX as u64;

/// Sparse count vector with terms sorted by key, plus its Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    terms: Vec<(u64, u32)>,
    norm: f64,
}

impl SparseVec {
    /// Character-bigram counts of `text`; unigram counts when the text has a
    /// single character.
    pub fn from_text(text: &str) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let mut counts: BTreeMap<u64, u32> = BTreeMap::new();
        if chars.len() == 1 {
            counts.insert((chars[0] as u64) << 32 | UNIGRAM_MARK, 1);
        } else {
            for pair in chars.windows(2) {
                let key = (pair[0] as u64) << 32 | pair[1] as u64;
                *counts.entry(key).or_default() += 1;
            }
        }
        let terms: Vec<(u64, u32)> = counts.into_iter().collect();
        let norm = terms
            .iter()
            .map(|&(_, c)| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt();
        SparseVec { terms, norm }
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    fn dot(&self, other: &SparseVec) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            match self.terms[i].0.cmp(&other.terms[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.terms[i].1 as f64 * other.terms[j].1 as f64;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// Cosine similarity in [0, 1]. Identical vectors score exactly 1.0; empty
/// vectors score 0.0 against everything.
pub fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    if a.terms == b.terms {
        return 1.0;
    }
    (a.dot(b) / (a.norm * b.norm)).clamp(0.0, 1.0)
}

/// Vectorized samples of exactly one split, queries are read-only.
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    entries: Vec<(Sample, SparseVec)>,
}

impl SimilarityIndex {
    pub fn build(samples: &[Sample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(SimilarityIndex {
            entries: samples
                .iter()
                .map(|s| (s.clone(), SparseVec::from_text(&s.text)))
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All indexed samples scored against `text`, sorted by similarity
    /// descending with ties broken by ascending sample id.
    pub fn rank(&self, text: &str) -> Vec<(&Sample, f64)> {
        let query = SparseVec::from_text(text);
        let mut scored: Vec<(&Sample, f64)> = self
            .entries
            .iter()
            .map(|(s, v)| (s, cosine(&query, v)))
            .collect();
        scored.sort_by(|(sa, va), (sb, vb)| {
            vb.partial_cmp(va)
                .expect("cosine never yields NaN")
                .then_with(|| sa.id.cmp(&sb.id))
        });
        scored
    }

    /// The single most similar sample, excluding `exclude_id`.
    pub fn nearest(&self, text: &str, exclude_id: &str) -> Option<&Sample> {
        self.rank(text)
            .into_iter()
            .find(|(s, _)| s.id != exclude_id)
            .map(|(s, _)| s)
    }
}

/// Demonstrations for one query, in prompt order. Predictions are attached
/// by the pipeline once the SLM outputs are loaded.
#[derive(Debug, Clone)]
pub struct DemonstrationSet {
    pub demos: Vec<(Sample, Option<SlmPrediction>)>,
    pub n: usize,
}

impl DemonstrationSet {
    pub fn attach_predictions(
        &mut self,
        preds: &std::collections::BTreeMap<String, SlmPrediction>,
    ) {
        for (sample, slot) in &mut self.demos {
            *slot = preds.get(&sample.id).cloned();
        }
    }
}

/// The `n` most similar dev samples to `query`, most similar first. Returns
/// fewer when the indexed split is small; the query itself is excluded when
/// ids collide.
pub fn top_n_similar(query: &Sample, index: &SimilarityIndex, n: usize) -> DemonstrationSet {
    let demos = index
        .rank(&query.text)
        .into_iter()
        .filter(|(s, _)| s.id != query.id)
        .take(n)
        .map(|(s, _)| (s.clone(), None))
        .collect();
    DemonstrationSet { demos, n }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Uniform selection of `n` dev samples without replacement, deterministic
/// per `(seed, query id)`.
pub fn random_demos(query: &Sample, dev: &[Sample], n: usize, seed: u64) -> DemonstrationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ fnv1a64(query.id.as_bytes())));
    let pool: Vec<&Sample> = dev.iter().filter(|s| s.id != query.id).collect();
    let take = n.min(pool.len());
    let picked = rand::seq::index::sample(&mut rng, pool.len(), take);
    DemonstrationSet {
        demos: picked
            .into_iter()
            .map(|i| (pool[i].clone(), None))
            .collect(),
        n,
    }
}
