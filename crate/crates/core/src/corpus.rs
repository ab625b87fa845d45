//! Training-set manifest: image/caption pairs keyed by a unique id.
//!
//! A manifest is a JSON-lines file, one record per line:
//!
//! ```text
//! {"id": "s0001", "image": "images/s0001.png", "caption": "red cotton shirt"}
//! ```
//!
//! Image paths are relative to the corpus root (by default the directory the
//! manifest lives in). Loading never touches the images; use
//! [`validate_corpus`] to check that they exist.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub id: String,
    pub caption: String,
    #[serde(rename = "image")]
    pub image_path: PathBuf,
}

/// An ordered, immutable set of training samples with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    samples: Vec<TrainingSample>,
    root: PathBuf,
    positions: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting empty or duplicate ids.
    pub fn new(samples: Vec<TrainingSample>, root: impl Into<PathBuf>) -> Result<Self> {
        let mut positions = HashMap::with_capacity(samples.len());
        for (pos, sample) in samples.iter().enumerate() {
            if sample.id.is_empty() {
                return Err(Error::MalformedRecord {
                    line: pos + 1,
                    reason: "empty id".into(),
                });
            }
            if positions.insert(sample.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(sample.id.clone()));
            }
        }
        Ok(Self {
            samples,
            root: root.into(),
            positions,
        })
    }

    pub fn samples(&self) -> &[TrainingSample] {
        &self.samples
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TrainingSample> {
        self.positions.get(id).map(|&pos| &self.samples[pos])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    /// Absolute (root-joined) path of a sample's image.
    pub fn image_path(&self, sample: &TrainingSample) -> PathBuf {
        self.root.join(&sample.image_path)
    }

    /// Returns a new corpus without `ids`, preserving manifest order.
    ///
    /// Every id must belong to the corpus. Excluding everything is allowed;
    /// the empty result is rejected by the stages that need samples.
    pub fn exclude<S: AsRef<str>>(&self, ids: &[S]) -> Result<Corpus> {
        let mut drop = HashSet::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            if !self.contains(id) {
                return Err(Error::UnknownId(id.to_string()));
            }
            drop.insert(id);
        }
        let kept = self
            .samples
            .iter()
            .filter(|s| !drop.contains(s.id.as_str()))
            .cloned()
            .collect();
        Corpus::new(kept, self.root.clone())
    }

    /// Writes the corpus back out in manifest format.
    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for sample in &self.samples {
            let line = serde_json::to_string(sample).expect("sample serializes");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Loads a manifest whose image paths are relative to the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Corpus> {
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    load_manifest_with_root(path, root)
}

pub fn load_manifest_with_root(path: &Path, root: impl Into<PathBuf>) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::MalformedInput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_manifest(&text, root)
}

/// Parses manifest text. Blank lines are skipped; any malformed line fails
/// the whole load.
pub fn parse_manifest(text: &str, root: impl Into<PathBuf>) -> Result<Corpus> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sample: TrainingSample = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if sample.id.is_empty() {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "empty id".into(),
            });
        }
        if !seen.insert(sample.id.clone()) {
            return Err(Error::DuplicateId(sample.id));
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Corpus::new(samples, root)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum Issue {
    MissingImage { id: String, path: PathBuf },
    UnreadableImage { id: String, path: PathBuf, reason: String },
    EmptyCaption { id: String },
}

impl Issue {
    pub fn id(&self) -> &str {
        match self {
            Issue::MissingImage { id, .. } | Issue::UnreadableImage { id, .. } | Issue::EmptyCaption { id } => id,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks captions and image files. Problems are collected, not raised.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut issues = Vec::new();
    for sample in corpus.samples() {
        if sample.caption.trim().is_empty() {
            issues.push(Issue::EmptyCaption { id: sample.id.clone() });
        }
        let path = corpus.image_path(sample);
        match fs::File::open(&path) {
            Ok(_) if path.is_file() => {}
            Ok(_) => issues.push(Issue::UnreadableImage {
                id: sample.id.clone(),
                path,
                reason: "not a regular file".into(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => issues.push(Issue::MissingImage {
                id: sample.id.clone(),
                path,
            }),
            Err(e) => issues.push(Issue::UnreadableImage {
                id: sample.id.clone(),
                path,
                reason: e.to_string(),
            }),
        }
    }
    ValidationReport { issues }
}
