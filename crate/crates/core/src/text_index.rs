//! TF-IDF representation of corpus captions.
//!
//! Weights follow the smoothed convention
//!
//! ```text
//! idf(t) = ln((1 + N) / (1 + df(t))) + 1
//! w(t, d) = tf(t, d) * idf(t)        (tf = raw count)
//! ```
//!
//! and every document vector is L2-normalised. Term ids are assigned in
//! lexicographic order of the term strings, so the index built from a corpus
//! does not depend on the order in which captions are inserted.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const INDEX_FORMAT: &str = "tfidf-index";
pub const INDEX_VERSION: u64 = 1;

/// Lowercases, splits on anything that is not alphanumeric and drops tokens
/// shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| tok.chars().count() >= 2)
        .map(str::to_owned)
        .collect()
}

/// Sparse vector with strictly increasing term ids and no stored zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds a vector from unsorted entries. Zero weights are dropped and
    /// repeated ids are summed.
    pub fn from_entries(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|&(id, _)| id);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (id, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == id => last.1 += w,
                _ => merged.push((id, w)),
            }
        }
        merged.retain(|&(_, w)| w != 0.0);
        Self { entries: merged }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self, term_id: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&term_id, |&(id, _)| id)
            .ok()
            .map(|pos| self.entries[pos].1)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for entry in &mut self.entries {
                entry.1 /= norm;
            }
        }
        self
    }
}

/// Smoothed inverse document frequency.
pub fn smoothed_idf(doc_count: usize, doc_freq: usize) -> f64 {
    ((1 + doc_count) as f64 / (1 + doc_freq) as f64).ln() + 1.0
}

/// Frozen TF-IDF index over a corpus' captions.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfIndex {
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    doc_freq: Vec<u32>,
    idf: Vec<f64>,
    doc_ids: Vec<String>,
    doc_vectors: Vec<SparseVector>,
}

impl TfIdfIndex {
    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, term_id: u32) -> Option<&str> {
        self.terms.get(term_id as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term_id: u32) -> u32 {
        self.doc_freq[term_id as usize]
    }

    pub fn idf(&self, term_id: u32) -> f64 {
        self.idf[term_id as usize]
    }

    /// Sample ids in manifest order; parallel to [`Self::doc_vectors`].
    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_vectors(&self) -> &[SparseVector] {
        &self.doc_vectors
    }

    pub fn doc_vector(&self, sample_id: &str) -> Option<&SparseVector> {
        self.doc_ids
            .iter()
            .position(|id| id == sample_id)
            .map(|pos| &self.doc_vectors[pos])
    }

    /// TF-IDF vector of arbitrary text against this index's vocabulary.
    ///
    /// Out-of-vocabulary terms are ignored; all-OOV text gives the zero vector.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for token in tokenize(text) {
            if let Some(id) = self.term_id(&token) {
                *counts.entry(id).or_default() += 1;
            }
        }
        self.weigh(counts)
    }

    fn weigh(&self, counts: BTreeMap<u32, u32>) -> SparseVector {
        let entries = counts
            .into_iter()
            .map(|(id, tf)| (id, tf as f64 * self.idf[id as usize]))
            .collect();
        SparseVector { entries }.normalized()
    }

    /// Saves the index as a versioned JSON-lines container.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let header = IndexHeader {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            doc_count: self.doc_count(),
            vocab_size: self.vocab_size(),
        };
        let mut write_line = |value: String| -> Result<()> { writeln!(out, "{value}").map_err(|e| Error::io(path, e)) };
        write_line(to_json(&header))?;
        write_line(to_json(&VocabBlock { vocab: &self.terms }))?;
        write_line(to_json(&DfBlock { df: &self.doc_freq }))?;
        write_line(to_json(&IdfBlock { idf: &self.idf }))?;
        for (id, vector) in self.doc_ids.iter().zip(&self.doc_vectors) {
            let (terms, weights): (Vec<u32>, Vec<f64>) = vector.entries.iter().copied().unzip();
            write_line(to_json(&DocRow {
                id: id.clone(),
                t: terms,
                w: weights,
            }))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::MalformedInput {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut lines = BufReader::new(file).lines();
        let mut next_line = |what: &str| -> Result<String> {
            match lines.next() {
                Some(Ok(line)) => Ok(line),
                Some(Err(e)) => Err(Error::CorruptIndex(format!("reading {what}: {e}"))),
                None => Err(Error::CorruptIndex(format!("truncated before {what}"))),
            }
        };

        let header_line = next_line("header")?;
        let header: serde_json::Value =
            serde_json::from_str(&header_line).map_err(|e| Error::CorruptIndex(format!("header: {e}")))?;
        if header.get("format").and_then(|f| f.as_str()) != Some(INDEX_FORMAT) {
            return Err(Error::CorruptIndex("not a tfidf-index file".into()));
        }
        let version = header
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptIndex("header has no version".into()))?;
        if version != INDEX_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: INDEX_VERSION,
            });
        }
        let header: IndexHeader =
            serde_json::from_value(header).map_err(|e| Error::CorruptIndex(format!("header: {e}")))?;

        let vocab: OwnedVocab = parse_block(&next_line("vocabulary")?, "vocabulary")?;
        let df: OwnedDf = parse_block(&next_line("document frequencies")?, "document frequencies")?;
        let idf: OwnedIdf = parse_block(&next_line("idf")?, "idf")?;
        let vocab_size = header.vocab_size;
        if vocab.vocab.len() != vocab_size || df.df.len() != vocab_size || idf.idf.len() != vocab_size {
            return Err(Error::CorruptIndex(
                "vocabulary blocks disagree with header vocab_size".into(),
            ));
        }

        let mut doc_ids = Vec::with_capacity(header.doc_count);
        let mut doc_vectors = Vec::with_capacity(header.doc_count);
        for row_no in 0..header.doc_count {
            let row: DocRow = parse_block(&next_line("document row")?, "document row")?;
            if row.t.len() != row.w.len() {
                return Err(Error::CorruptIndex(format!("row {row_no}: ragged entries")));
            }
            let strictly_increasing = row.t.windows(2).all(|p| p[0] < p[1]);
            if !strictly_increasing || row.t.iter().any(|&t| t as usize >= vocab_size) {
                return Err(Error::CorruptIndex(format!("row {row_no}: bad term ids")));
            }
            doc_ids.push(row.id);
            doc_vectors.push(SparseVector {
                entries: row.t.into_iter().zip(row.w).collect(),
            });
        }
        if let Some(Ok(extra)) = lines.next() {
            if !extra.trim().is_empty() {
                return Err(Error::CorruptIndex("trailing data after last row".into()));
            }
        }

        let term_ids = vocab
            .vocab
            .iter()
            .enumerate()
            .map(|(id, term)| (term.clone(), id as u32))
            .collect();
        Ok(Self {
            terms: vocab.vocab,
            term_ids,
            doc_freq: df.df,
            idf: idf.idf,
            doc_ids,
            doc_vectors,
        })
    }
}

/// Builds the index over every caption of `corpus`.
pub fn build_index(corpus: &Corpus) -> Result<TfIdfIndex> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let doc_terms: Vec<BTreeMap<String, u32>> = corpus
        .samples()
        .iter()
        .map(|s| {
            let mut counts = BTreeMap::new();
            for token in tokenize(&s.caption) {
                *counts.entry(token).or_insert(0u32) += 1;
            }
            counts
        })
        .collect();

    let mut df_by_term: BTreeMap<&str, u32> = BTreeMap::new();
    for counts in &doc_terms {
        for term in counts.keys() {
            *df_by_term.entry(term.as_str()).or_default() += 1;
        }
    }
    if df_by_term.is_empty() {
        return Err(Error::NoTokens);
    }

    let n = corpus.len();
    let terms: Vec<String> = df_by_term.keys().map(|t| t.to_string()).collect();
    let doc_freq: Vec<u32> = df_by_term.values().copied().collect();
    let idf: Vec<f64> = doc_freq.iter().map(|&df| smoothed_idf(n, df as usize)).collect();
    let term_ids: HashMap<String, u32> = terms.iter().enumerate().map(|(id, t)| (t.clone(), id as u32)).collect();

    let mut index = TfIdfIndex {
        terms,
        term_ids,
        doc_freq,
        idf,
        doc_ids: corpus.ids().map(String::from).collect(),
        doc_vectors: Vec::with_capacity(n),
    };
    let vectors: Vec<SparseVector> = doc_terms
        .into_iter()
        .map(|counts| {
            let by_id = counts
                .into_iter()
                .map(|(term, tf)| (index.term_ids[&term], tf))
                .collect();
            index.weigh(by_id)
        })
        .collect();
    index.doc_vectors = vectors;
    Ok(index)
}

/// Free-function form of [`TfIdfIndex::vectorize`].
pub fn vectorize(index: &TfIdfIndex, text: &str) -> SparseVector {
    index.vectorize(text)
}

pub fn save_index(index: &TfIdfIndex, path: &Path) -> Result<()> {
    index.save(path)
}

pub fn load_index(path: &Path) -> Result<TfIdfIndex> {
    TfIdfIndex::load(path)
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: u64,
    doc_count: usize,
    vocab_size: usize,
}

#[derive(Serialize)]
struct VocabBlock<'a> {
    vocab: &'a [String],
}

#[derive(Serialize)]
struct DfBlock<'a> {
    df: &'a [u32],
}

#[derive(Serialize)]
struct IdfBlock<'a> {
    idf: &'a [f64],
}

#[derive(Deserialize)]
struct OwnedVocab {
    vocab: Vec<String>,
}

#[derive(Deserialize)]
struct OwnedDf {
    df: Vec<u32>,
}

#[derive(Deserialize)]
struct OwnedIdf {
    idf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DocRow {
    id: String,
    t: Vec<u32>,
    w: Vec<f64>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("index blocks serialize")
}

fn parse_block<T: serde::de::DeserializeOwned>(line: &str, what: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::CorruptIndex(format!("{what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TrainingSample;

    pub(crate) fn corpus_from(captions: &[&str]) -> Corpus {
        let samples = captions
            .iter()
            .enumerate()
            .map(|(i, c)| TrainingSample {
                id: format!("doc{i}"),
                caption: c.to_string(),
                image_path: format!("doc{i}.png").into(),
            })
            .collect();
        Corpus::new(samples, ".").unwrap()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Red-Shirt, XL!"), ["red", "shirt", "xl"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a B c9"), ["c9"]);
    }

    #[test]
    fn three_doc_idf_values() {
        let index = build_index(&corpus_from(&["red shirt", "blue shirt", "red shoes"])).unwrap();
        let df = |t: &str| index.doc_freq(index.term_id(t).unwrap());
        let idf = |t: &str| index.idf(index.term_id(t).unwrap());
        assert_eq!(index.doc_count(), 3);
        assert_eq!((df("red"), df("shirt"), df("blue"), df("shoes")), (2, 2, 1, 1));
        // ln(4/2) + 1 and ln(4/3) + 1
        assert!((idf("blue") - 1.693_147_180_559_945).abs() < 1e-12);
        assert!((idf("red") - 1.287_682_072_451_781).abs() < 1e-12);
        assert_eq!(idf("shoes"), idf("blue"));
    }

    #[test]
    fn single_document_collapses_idf_to_one() {
        let index = build_index(&corpus_from(&["shirt shirt collar"])).unwrap();
        for id in 0..index.vocab_size() as u32 {
            assert_eq!(index.doc_freq(id), 1);
            assert_eq!(index.idf(id), 1.0);
        }
        let v = &index.doc_vectors()[0];
        let collar = v.weight(index.term_id("collar").unwrap()).unwrap();
        let shirt = v.weight(index.term_id("shirt").unwrap()).unwrap();
        assert!((collar - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((shirt - 2.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn token_free_caption_gives_zero_vector() {
        let index = build_index(&corpus_from(&["the !!", "a", "blue shirt"])).unwrap();
        assert!(index.doc_vectors()[1].is_zero());
        assert_eq!(index.doc_count(), 3);
        assert!((index.doc_vectors()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn build_errors() {
        let empty = Corpus::new(vec![], ".").unwrap();
        assert!(matches!(build_index(&empty), Err(Error::EmptyCorpus)));
        assert!(matches!(
            build_index(&corpus_from(&["a", "!", "x y"])),
            Err(Error::NoTokens)
        ));
    }

    #[test]
    fn vectorize_matches_stored_vector_and_ignores_oov() {
        let index = build_index(&corpus_from(&["red shirt", "blue shirt", "red shoes"])).unwrap();
        let v = index.vectorize("blue shirt");
        assert!((v.dot(&index.doc_vectors()[1]) - 1.0).abs() < 1e-12);
        assert!(index.vectorize("zzzz qqqq").is_zero());

        let q = index.vectorize("red shirt");
        let ids: Vec<u32> = q.entries().iter().map(|e| e.0).collect();
        let mut expected = vec![index.term_id("red").unwrap(), index.term_id("shirt").unwrap()];
        expected.sort();
        assert_eq!(ids, expected);
    }

    #[test]
    fn save_load_round_trip_and_failures() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.jsonl");
        let index = build_index(&corpus_from(&["red shirt", "blue shirt", "red shoes"])).unwrap();
        index.save(&path).unwrap();
        let loaded = TfIdfIndex::load(&path).unwrap();
        assert_eq!(loaded, index);

        let text = fs::read_to_string(&path).unwrap();
        let truncated = dir.path().join("trunc.jsonl");
        fs::write(&truncated, &text[..text.len() - 20]).unwrap();
        assert!(matches!(TfIdfIndex::load(&truncated), Err(Error::CorruptIndex(_))));

        let lines: Vec<&str> = text.lines().collect();
        let short = dir.path().join("short.jsonl");
        fs::write(&short, lines[..lines.len() - 1].join("\n")).unwrap();
        assert!(matches!(TfIdfIndex::load(&short), Err(Error::CorruptIndex(_))));

        let future = dir.path().join("future.jsonl");
        fs::write(&future, text.replacen("\"version\":1", "\"version\":2", 1)).unwrap();
        assert!(matches!(
            TfIdfIndex::load(&future),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
    }

    #[test]
    fn sparse_vector_construction_drops_zeros_and_sorts() {
        let v = SparseVector::from_entries(vec![(5, 1.0), (2, 0.0), (1, 2.0), (5, 0.5)]);
        assert_eq!(v.entries(), &[(1, 2.0), (5, 1.5)]);
    }
}
