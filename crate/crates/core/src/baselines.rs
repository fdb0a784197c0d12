//! BM25 and the non-learned selection strategies.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenId, PAD};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selector::SelectedSentences;

/// Document frequencies and lengths over the scored collection.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub doc_freq: HashMap<TokenId, usize>,
    pub doc_lengths: Vec<usize>,
    pub avg_doc_len: f64,
    pub doc_count: usize,
}

impl CorpusStats {
    /// Each item is one document's full token sequence (title and body).
    pub fn build<I, D>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = TokenId>,
    {
        let mut doc_freq: HashMap<TokenId, usize> = HashMap::new();
        let mut doc_lengths = Vec::new();
        for doc in docs {
            let mut seen = BTreeSet::new();
            let mut len = 0;
            for t in doc.into_iter().filter(|&t| t != PAD) {
                len += 1;
                seen.insert(t);
            }
            for t in seen {
                *doc_freq.entry(t).or_default() += 1;
            }
            doc_lengths.push(len);
        }
        if doc_lengths.is_empty() {
            return Err(Error::Data("BM25 statistics need at least one document".into()));
        }
        let total: usize = doc_lengths.iter().sum();
        if total == 0 {
            return Err(Error::Data("BM25 statistics over documents with no tokens".into()));
        }
        let doc_count = doc_lengths.len();
        Ok(Self {
            doc_freq,
            avg_doc_len: total as f64 / doc_count as f64,
            doc_lengths,
            doc_count,
        })
    }

    pub fn df(&self, t: TokenId) -> usize {
        self.doc_freq.get(&t).copied().unwrap_or(0)
    }

    /// `ln(1 + (N − df + 0.5) / (df + 0.5))`.
    pub fn idf(&self, t: TokenId) -> f64 {
        let n = self.doc_count as f64;
        let df = self.df(t) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0) || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidConfig(format!(
                "bm25 needs k1 >= 0 and b in [0, 1], got k1={} b={}",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

pub fn bm25_score(query: &[TokenId], doc: &[TokenId], stats: &CorpusStats, p: Bm25Params) -> f64 {
    let mut tf: HashMap<TokenId, usize> = HashMap::new();
    let mut len = 0usize;
    for &t in doc.iter().filter(|&&t| t != PAD) {
        *tf.entry(t).or_default() += 1;
        len += 1;
    }
    let norm = p.k1 * (1.0 - p.b + p.b * len as f64 / stats.avg_doc_len);
    let terms: BTreeSet<TokenId> = query.iter().copied().filter(|&t| t != PAD).collect();
    terms
        .into_iter()
        .filter_map(|t| tf.get(&t).map(|&f| (t, f as f64)))
        .map(|(t, f)| stats.idf(t) * f * (p.k1 + 1.0) / (f + norm))
        .sum()
}

/// Body sentences `0..K`, title prepended.
pub fn select_firstk<S: Scalar>(sentence_count: usize, k: usize) -> SelectedSentences<S> {
    SelectedSentences {
        indices: (0..k.min(sentence_count)).collect(),
        log_prob_sum: S::zero(),
        includes_title: true,
    }
}

/// K body sentences uniformly without replacement, in draw order.
pub fn select_random<S: Scalar, R: Rng + ?Sized>(
    sentence_count: usize,
    k: usize,
    rng: &mut R,
) -> SelectedSentences<S> {
    let k = k.min(sentence_count);
    SelectedSentences {
        indices: index::sample(rng, sentence_count, k).into_vec(),
        log_prob_sum: S::zero(),
        includes_title: true,
    }
}
