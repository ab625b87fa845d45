//! Brute-force reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's scoring code. Weights are kept in
//! `BTreeMap`s keyed by term so every sum runs in term order, which is also
//! the order the index uses; that makes exact comparison meaningful.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;

pub fn oracle_tokens(text: &str) -> Vec<String> {
    let lower: String = text.chars().flat_map(char::to_lowercase).collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in lower.chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else {
            if cur.chars().count() >= 2 {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    if cur.chars().count() >= 2 {
        out.push(cur);
    }
    out
}

pub type TermWeights = BTreeMap<String, f64>;

pub struct OracleIndex {
    pub idf: BTreeMap<String, f64>,
    pub docs: Vec<(String, TermWeights)>,
}

fn l2_normalize(mut w: TermWeights) -> TermWeights {
    let mut ss = 0.0;
    for v in w.values() {
        ss += v * v;
    }
    let norm = ss.sqrt();
    if norm > 0.0 {
        for v in w.values_mut() {
            *v /= norm;
        }
    }
    w
}

fn norm(w: &TermWeights) -> f64 {
    let mut ss = 0.0;
    for v in w.values() {
        ss += v * v;
    }
    ss.sqrt()
}

impl OracleIndex {
    pub fn build(docs: &[(String, String)]) -> Self {
        let n = docs.len() as f64;
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for (_, caption) in docs {
            let mut seen: Vec<String> = oracle_tokens(caption);
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let idf: BTreeMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        let mut index = Self { idf, docs: Vec::new() };
        index.docs = docs
            .iter()
            .map(|(id, caption)| (id.clone(), index.vector(caption)))
            .collect();
        index
    }

    pub fn vector(&self, text: &str) -> TermWeights {
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in oracle_tokens(text) {
            if self.idf.contains_key(&t) {
                *tf.entry(t).or_insert(0) += 1;
            }
        }
        l2_normalize(
            tf.into_iter()
                .map(|(t, c)| {
                    let w = c as f64 * self.idf[&t];
                    (t, w)
                })
                .collect(),
        )
    }

    pub fn cosine(a: &TermWeights, b: &TermWeights) -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        let mut dot = 0.0;
        for (t, wa) in a {
            if let Some(wb) = b.get(t) {
                dot += wa * wb;
            }
        }
        (dot / (norm(a) * norm(b))).clamp(-1.0, 1.0)
    }

    /// Every positive-score document, best first, ties by id.
    pub fn rank(&self, prompt: &str) -> Vec<(String, f64)> {
        let q = self.vector(prompt);
        let mut scored: Vec<(String, f64)> = self
            .docs
            .iter()
            .map(|(id, d)| (id.clone(), Self::cosine(&q, d)))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored
    }
}

/// `ceil(fraction * n)` computed in exact rational arithmetic when the
/// fraction has at most 6 decimals.
pub fn exact_ceil(fraction: f64, n: usize) -> usize {
    let scaled = (fraction * 1e6).round() as u128;
    let num = scaled * n as u128;
    num.div_ceil(1_000_000) as usize
}

/// Caption generator over a random vocabulary, with case and punctuation
/// noise, one-letter tokens that must be dropped and occasional duplicates.
pub fn random_captions<R: Rng>(rng: &mut R, n: usize, vocab: usize) -> Vec<(String, String)> {
    let words: Vec<String> = (0..vocab)
        .map(|_| {
            let len = rng.random_range(2..8);
            (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
        })
        .collect();
    let seps = [" ", ", ", "-", "  ", "; ", " x "];
    let mut out: Vec<(String, String)> = Vec::with_capacity(n);
    for i in 0..n {
        let caption = if i > 0 && rng.random_bool(0.05) {
            out[rng.random_range(0..i)].1.clone()
        } else {
            let len = rng.random_range(1..12);
            let mut c = String::new();
            for j in 0..len {
                if j > 0 {
                    c.push_str(seps[rng.random_range(0..seps.len())]);
                }
                // skewed choice so some terms are common
                let r: f64 = rng.random();
                let w = &words[((r * r) * vocab as f64) as usize % vocab];
                if rng.random_bool(0.1) {
                    c.push_str(&w.to_uppercase());
                } else {
                    c.push_str(w);
                }
            }
            c
        };
        // ids are not in insertion order, so tie-breaks are tested
        out.push((format!("d{:05}", (i * 7919) % 100_000), caption));
    }
    out
}
