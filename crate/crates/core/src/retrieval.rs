//! Phase one: text retrieval over caption vectors.
//!
//! Membership in a [`RetrievalResult`] is the binary relevance filter: a
//! training sample takes part in attribution iff it is among the retrieved
//! candidates.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text_index::{SparseVector, TfIdfIndex};

/// Default retained share of the corpus.
pub const DEFAULT_CUTOFF_FRACTION: f64 = 0.002;

/// Slack applied before rounding `fraction * n` up, so that products such as
/// `0.1 * 30 = 3.0000000000000004` resolve to 3 rather than 4.
const CEIL_SLACK: f64 = 1e-9;

/// `ceil(fraction * n)`, robust to binary rounding of the product.
pub fn ceil_fraction(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - CEIL_SLACK).ceil().max(0.0)) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    TopK(usize),
    TopFraction(f64),
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::TopFraction(DEFAULT_CUTOFF_FRACTION)
    }
}

impl Cutoff {
    /// Number of candidates to keep out of `n` documents.
    pub fn resolve(&self, n: usize) -> Result<usize> {
        match *self {
            Cutoff::TopK(k) if k >= 1 => Ok(k),
            Cutoff::TopK(k) => Err(Error::InvalidCutoff(format!("k = {k}, must be >= 1"))),
            Cutoff::TopFraction(f) if f > 0.0 && f <= 1.0 => Ok(ceil_fraction(f, n).max(1)),
            Cutoff::TopFraction(f) => Err(Error::InvalidCutoff(format!("fraction = {f}, must be in (0, 1]"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub text_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub prompt: String,
    pub cutoff: Cutoff,
    pub candidates: Vec<Candidate>,
}

impl RetrievalResult {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.candidates.iter().any(|c| c.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.id.as_str())
    }
}

/// Cosine of two sparse vectors; 0 when either is the zero vector.
pub fn text_similarity(a: &SparseVector, b: &SparseVector) -> f64 {
    if a.is_zero() || b.is_zero() {
        return 0.0;
    }
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0)
}

/// Descending score, then ascending id.
pub(crate) fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// Scores every caption against `prompt` and keeps the best `cutoff` with a
/// non-zero score.
pub fn retrieve(index: &TfIdfIndex, prompt: &str, cutoff: Cutoff) -> Result<RetrievalResult> {
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let keep = cutoff.resolve(index.doc_count())?;
    let query = index.vectorize(prompt);
    if query.is_zero() {
        log::warn!("prompt {prompt:?} shares no terms with the index vocabulary");
        return Ok(RetrievalResult {
            prompt: prompt.to_string(),
            cutoff,
            candidates: Vec::new(),
        });
    }

    let mut scored: Vec<Candidate> = index
        .doc_ids()
        .iter()
        .zip(index.doc_vectors())
        .filter_map(|(id, doc)| {
            let score = text_similarity(&query, doc);
            (score > 0.0).then(|| Candidate {
                id: id.clone(),
                text_score: score,
            })
        })
        .collect();
    scored.sort_by(|a, b| rank_order(a.text_score, &a.id, b.text_score, &b.id));
    scored.truncate(keep);

    Ok(RetrievalResult {
        prompt: prompt.to_string(),
        cutoff,
        candidates: scored,
    })
}
