//! Plain-text word lists: one lowercase word per line, `#` starts a comment.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordList {
    words: BTreeSet<String>,
}

impl WordList {
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn load(path: &Path) -> Result<Self> {
        fs::read_to_string(path)
            .map(|text| Self::parse(&text))
            .map_err(|e| Error::MalformedInput {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    /// Words in sorted order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for WordList {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        Self {
            words: iter.into_iter().map(|w| w.into().to_lowercase()).collect(),
        }
    }
}

pub(crate) const COLORS: &str = include_str!("../data/colors.txt");
pub(crate) const SHAPES: &str = include_str!("../data/shapes.txt");
pub(crate) const GARMENTS: &str = include_str!("../data/garments.txt");
pub(crate) const BRANDS: &str = include_str!("../data/brands.txt");
pub(crate) const NOUNS: &str = include_str!("../data/nouns.txt");
pub(crate) const VERBS: &str = include_str!("../data/verbs.txt");
pub(crate) const STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Byte spans of maximal alphanumeric runs in `text`.
pub(crate) fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (pos, ch) in text.char_indices() {
        match (ch.is_alphanumeric(), start) {
            (true, None) => start = Some(pos),
            (false, Some(s)) => {
                spans.push((s, pos));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}
