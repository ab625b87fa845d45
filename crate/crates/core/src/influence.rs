//! Phase two: visual comparison of retrieved candidates with the generated
//! image, kernel-weighted influence and the influential set.
//!
//! For a prompt `x` and generated image `y`, each retrieved training sample
//! `i` gets
//!
//! ```text
//! K_i     = cos(emb(y), emb(y_i))                  visual kernel
//! alpha_i = max(K_i, 0) / sum_j max(K_j, 0)        normalised weight
//! c_i     = w * cos(raw(y), raw(y_i)) + (1 - w) * K_i
//! ```
//!
//! Samples outside the retrieval set carry zero weight by construction. The
//! influential set is the top `ceil(fraction * m)` candidates by `c_i`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_features::{cosine, EmbeddingStore, ImageSource, RawFeature, Resolution};
use crate::retrieval::{ceil_fraction, rank_order, retrieve, Cutoff};
use crate::text_index::TfIdfIndex;

/// Smallest kernel sum that can be normalised.
pub const EPS_SUM: f64 = 1e-12;
/// Kernels are floored here before normalisation.
pub const KERNEL_FLOOR: f64 = 0.0;
pub const DEFAULT_COMBINE_WEIGHT: f64 = 0.5;
pub const DEFAULT_TOP_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceConfig {
    pub cutoff: Cutoff,
    /// Weight of the raw-pixel cosine in the combined score.
    pub combine_weight: f64,
    pub top_fraction: f64,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        Self {
            cutoff: Cutoff::default(),
            combine_weight: DEFAULT_COMBINE_WEIGHT,
            top_fraction: DEFAULT_TOP_FRACTION,
        }
    }
}

impl InfluenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.combine_weight) {
            return Err(Error::WeightOutOfRange(self.combine_weight));
        }
        check_fraction(self.top_fraction)?;
        self.cutoff.resolve(1).map(|_| ())
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidFraction(fraction))
    }
}

/// The image under attribution: raw pixels plus its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedImage {
    pub id: String,
    pub raw: RawFeature,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub sample_id: String,
    pub text_score: f64,
    pub raw_cos: f64,
    /// Embedding cosine, the visual kernel before flooring.
    pub emb_cos: f64,
    /// Kernel value after flooring, the numerator of `alpha`.
    pub kernel: f64,
    pub combined: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub cutoff: Cutoff,
    pub combine_weight: f64,
    pub top_fraction: f64,
    pub kernel_floor: f64,
    pub model_tag: String,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub prompt: String,
    pub generated_id: String,
    /// Number of retrieved candidates.
    pub m: usize,
    /// Candidates by combined score, descending, ties by id.
    pub entries: Vec<CandidateScore>,
    /// Sum of alpha over retrieved candidates; 1 whenever `m >= 1`.
    pub influence_value: f64,
    /// Ids of the top `top_fraction` entries.
    pub influential: Vec<String>,
    pub config: ReportConfig,
}

/// Visual similarity kernel: cosine of two embeddings.
pub fn kernel(emb_y: &[f64], emb_yi: &[f64]) -> Result<f64> {
    cosine(emb_y, emb_yi)
}

/// Normalises kernel values to weights summing to one, order preserved.
pub fn influence_weights(kernels: &[f64]) -> Result<Vec<f64>> {
    let sum: f64 = kernels.iter().sum();
    if kernels.is_empty() || sum <= EPS_SUM {
        return Err(Error::DegenerateKernelSum { sum });
    }
    Ok(kernels.iter().map(|k| k / sum).collect())
}

/// `w * raw_cos + (1 - w) * emb_cos`.
pub fn combined_similarity(raw_cos: f64, emb_cos: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::WeightOutOfRange(w));
    }
    if w == 0.0 {
        return Ok(emb_cos);
    }
    if w == 1.0 {
        return Ok(raw_cos);
    }
    Ok(w * raw_cos + (1.0 - w) * emb_cos)
}

/// Runs retrieval then visual scoring and returns the full report.
pub fn data_influence(
    prompt: &str,
    generated: &GeneratedImage,
    index: &TfIdfIndex,
    store: &EmbeddingStore,
    images: &dyn ImageSource,
    config: &InfluenceConfig,
) -> Result<InfluenceReport> {
    config.validate()?;
    let retrieval = retrieve(index, prompt, config.cutoff)?;
    if retrieval.is_empty() {
        return Err(Error::EmptyRetrieval {
            prompt: prompt.to_string(),
        });
    }

    let mut entries = Vec::with_capacity(retrieval.len());
    for candidate in &retrieval.candidates {
        let emb = store
            .get(&candidate.id)
            .ok_or_else(|| Error::MissingEmbedding(candidate.id.clone()))?;
        let raw = images.raw_feature(&candidate.id)?;
        let raw_cos = match cosine(&generated.raw.pixels, &raw.pixels) {
            Err(Error::ZeroVector) => 0.0,
            other => other?,
        };
        let emb_cos = kernel(&generated.embedding, emb)?;
        entries.push(CandidateScore {
            sample_id: candidate.id.clone(),
            text_score: candidate.text_score,
            raw_cos,
            emb_cos,
            kernel: emb_cos.max(KERNEL_FLOOR),
            combined: combined_similarity(raw_cos, emb_cos, config.combine_weight)?,
            alpha: 0.0,
        });
    }

    let kernels: Vec<f64> = entries.iter().map(|e| e.kernel).collect();
    let alphas = influence_weights(&kernels)?;
    for (entry, alpha) in entries.iter_mut().zip(&alphas) {
        entry.alpha = *alpha;
    }
    // Every retrieved candidate has B = 1.
    let influence_value = alphas.iter().sum();
    entries.sort_by(|a, b| rank_order(a.combined, &a.sample_id, b.combined, &b.sample_id));

    let mut report = InfluenceReport {
        prompt: prompt.to_string(),
        generated_id: generated.id.clone(),
        m: entries.len(),
        entries,
        influence_value,
        influential: Vec::new(),
        config: ReportConfig {
            cutoff: config.cutoff,
            combine_weight: config.combine_weight,
            top_fraction: config.top_fraction,
            kernel_floor: KERNEL_FLOOR,
            model_tag: store.model_tag().to_string(),
            resolution: generated.raw.resolution,
        },
    };
    report.influential = top_influential(&report, config.top_fraction)?;
    Ok(report)
}

/// Ids of the top `ceil(fraction * m)` entries by combined score.
pub fn top_influential(report: &InfluenceReport, fraction: f64) -> Result<Vec<String>> {
    check_fraction(fraction)?;
    if report.entries.is_empty() {
        return Err(Error::EmptyRetrieval {
            prompt: report.prompt.clone(),
        });
    }
    let take = ceil_fraction(fraction, report.entries.len()).max(1);
    Ok(report.entries.iter().take(take).map(|e| e.sample_id.clone()).collect())
}

/// Aligned text table of a report's ranking. Influential rows are starred.
pub fn render_ranking(report: &InfluenceReport) -> String {
    let id_width = report
        .entries
        .iter()
        .map(|e| e.sample_id.len())
        .max()
        .unwrap_or(2)
        .max(2);
    let mut out = String::new();
    let _ = writeln!(out, "prompt: {}", report.prompt);
    let _ = writeln!(
        out,
        "generated: {}  m: {}  model: {}  w: {}",
        report.generated_id, report.m, report.config.model_tag, report.config.combine_weight
    );
    let _ = writeln!(
        out,
        "{:>4}  {:<id_width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}",
        "rank", "id", "text", "raw", "emb", "combined", "alpha"
    );
    for (rank, e) in report.entries.iter().enumerate() {
        let mark = if report.influential.contains(&e.sample_id) {
            "*"
        } else {
            " "
        };
        let _ = writeln!(
            out,
            "{:>4}  {:<id_width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4} {mark}",
            rank + 1,
            e.sample_id,
            e.text_score,
            e.raw_cos,
            e.emb_cos,
            e.combined,
            e.alpha
        );
    }
    out
}
