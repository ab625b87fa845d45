//! A transparent stand-in for a text-to-image model.
//!
//! The toy generator retrieves the `k` training images whose captions best
//! match the prompt and returns their convex pixel blend, optionally with
//! seeded Gaussian noise. Because the sources of every output are known
//! exactly, it gives attribution a ground truth to be checked against, and it
//! makes the trace, unlearn, regenerate and measure loop runnable on a laptop.

use std::path::PathBuf;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::image_features::{EmbeddingStore, ImageSource, RawFeature, Resolution, GENERATED_ID};
use crate::influence::{data_influence, GeneratedImage, InfluenceConfig, InfluenceReport};
use crate::retrieval::{retrieve, Cutoff};
use crate::text_index::{build_index, TfIdfIndex};
use crate::unlearn_eval::{compare_outputs, compute_ssim, summarize, Stage, SummaryRow, UnlearnStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    Uniform,
    TextScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Number of retrieved images blended.
    pub k: usize,
    pub resolution: Resolution,
    pub weight_mode: WeightMode,
    /// Standard deviation of additive pixel noise; 0 disables it.
    pub epsilon: f64,
    pub noise_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            k: 3,
            resolution: Resolution::default(),
            weight_mode: WeightMode::Uniform,
            epsilon: 0.0,
            noise_seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("generator k must be >= 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig("generator epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Output of one generation together with its true sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub image: RawFeature,
    /// `(sample id, blend weight)`; weights sum to 1.
    pub sources: Vec<(String, f64)>,
}

impl Generation {
    pub fn source_ids(&self) -> impl Iterator<Item = &str> {
        self.sources.iter().map(|(id, _)| id.as_str())
    }
}

/// Blends the top-`k` retrieved images for `prompt`.
///
/// Fewer than `k` candidates are blended when retrieval returns fewer.
pub fn generate(
    index: &TfIdfIndex,
    images: &dyn ImageSource,
    prompt: &str,
    config: &GeneratorConfig,
) -> Result<Generation> {
    config.validate()?;
    let retrieval = retrieve(index, prompt, Cutoff::TopK(config.k))?;
    if retrieval.is_empty() {
        return Err(Error::EmptyRetrieval {
            prompt: prompt.to_string(),
        });
    }
    let raw_weights: Vec<f64> = match config.weight_mode {
        WeightMode::Uniform => vec![1.0; retrieval.len()],
        WeightMode::TextScore => retrieval.candidates.iter().map(|c| c.text_score).collect(),
    };
    let total: f64 = raw_weights.iter().sum();
    let weights: Vec<f64> = raw_weights.iter().map(|w| w / total).collect();

    let len = config.resolution.pixels() * 3;
    let mut pixels = vec![0.0; len];
    for (candidate, &weight) in retrieval.candidates.iter().zip(&weights) {
        let source = images.raw_feature(&candidate.id)?;
        if source.pixels.len() != len {
            return Err(Error::LengthMismatch {
                left: len,
                right: source.pixels.len(),
            });
        }
        for (acc, &v) in pixels.iter_mut().zip(&source.pixels) {
            *acc += weight * v;
        }
    }
    if config.epsilon > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
        let noise = Normal::new(0.0, config.epsilon).expect("epsilon is finite");
        for v in &mut pixels {
            *v += noise.sample(&mut rng);
        }
    }
    for v in &mut pixels {
        *v = v.clamp(0.0, 1.0);
    }

    Ok(Generation {
        image: RawFeature::new(pixels, config.resolution, GENERATED_ID),
        sources: retrieval.candidates.into_iter().map(|c| c.id).zip(weights).collect(),
    })
}

/// Maps an image to an embedding vector.
pub trait Embedder {
    fn model_tag(&self) -> &str;
    fn embed(&self, image: &RawFeature) -> Vec<f64>;
}

/// Colour layout embedding: mean RGB over a `grid x grid` partition minus the
/// image's own mean colour, so a shared flat background carries no weight.
/// A uniformly coloured image maps to the zero vector.
/// Used for the fixture sidecar and generated images.
#[derive(Debug, Clone)]
pub struct PooledColorEmbedder {
    grid: usize,
    tag: String,
}

impl PooledColorEmbedder {
    pub fn new(grid: usize) -> Self {
        Self {
            grid,
            tag: format!("toy-pooled-rgb-{grid}x{grid}-demeaned"),
        }
    }

    pub fn dim(&self) -> usize {
        self.grid * self.grid * 3
    }
}

impl Default for PooledColorEmbedder {
    fn default() -> Self {
        Self::new(8)
    }
}

impl Embedder for PooledColorEmbedder {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn embed(&self, image: &RawFeature) -> Vec<f64> {
        let Resolution { height, width } = image.resolution;
        let g = self.grid;
        let mut sums = vec![0.0; g * g * 3];
        let mut counts = vec![0usize; g * g];
        for y in 0..height {
            let cy = y * g / height;
            for x in 0..width {
                let cx = x * g / width;
                let cell = cy * g + cx;
                counts[cell] += 1;
                let px = (y * width + x) * 3;
                for c in 0..3 {
                    sums[cell * 3 + c] += image.pixels[px + c];
                }
            }
        }
        let mut cells: Vec<f64> = sums
            .iter()
            .enumerate()
            .map(|(i, s)| match counts[i / 3] {
                0 => 0.0,
                n => s / n as f64,
            })
            .collect();
        let pixels = (height * width) as f64;
        for c in 0..3 {
            let mean = image.pixels.iter().skip(c).step_by(3).sum::<f64>() / pixels;
            for v in cells.iter_mut().skip(c).step_by(3) {
                *v -= mean;
            }
        }
        cells
    }
}

/// Everything a closed-loop trial reads.
pub struct ToyWorld<'a> {
    pub corpus: &'a Corpus,
    pub images: &'a dyn ImageSource,
    pub store: &'a EmbeddingStore,
    pub embedder: &'a dyn Embedder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ExclusionStrategy {
    /// Remove the traced influential set.
    Influential,
    /// Remove as many randomly chosen samples from outside the influential set.
    RandomNonInfluential { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub prompt: String,
    pub strategy: ExclusionStrategy,
    /// Sources blended into the reference image.
    pub sources: Vec<String>,
    pub influential: Vec<String>,
    pub excluded: Vec<String>,
    /// Sources blended after exclusion.
    pub sources_after: Vec<String>,
    pub before_similarity: f64,
    pub after_similarity: f64,
    /// `before_similarity - after_similarity`.
    pub similarity_drop: f64,
    pub ssim_before: f64,
    pub ssim_after: f64,
    pub report: InfluenceReport,
    pub before_image: Option<PathBuf>,
    pub after_image: Option<PathBuf>,
    #[serde(skip)]
    pub images: Option<TrialImages>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialImages {
    pub reference: RawFeature,
    pub before: RawFeature,
    pub after: RawFeature,
}

impl TrialResult {
    /// True when every reference source is in the influential set.
    pub fn recovered_all_sources(&self) -> bool {
        self.sources.iter().all(|s| self.influential.contains(s))
    }
}

fn embed_as_generated(world: &ToyWorld<'_>, image: RawFeature) -> GeneratedImage {
    GeneratedImage {
        id: GENERATED_ID.into(),
        embedding: world.embedder.embed(&image),
        raw: image,
    }
}

fn choose_exclusions(corpus: &Corpus, influential: &[String], strategy: ExclusionStrategy) -> Vec<String> {
    match strategy {
        ExclusionStrategy::Influential => influential.to_vec(),
        ExclusionStrategy::RandomNonInfluential { seed } => {
            let pool: Vec<&str> = corpus.ids().filter(|id| !influential.iter().any(|i| i == id)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let take = influential.len().min(pool.len());
            let mut picked: Vec<String> = index::sample(&mut rng, pool.len(), take)
                .into_iter()
                .map(|i| pool[i].to_string())
                .collect();
            picked.sort();
            picked
        }
    }
}

/// Generate, trace, exclude, regenerate and measure, for one prompt.
///
/// The first generation is the reference. The "before" output is a second
/// draw on the full corpus (identical to the reference when `epsilon = 0`)
/// and the "after" output is drawn on the reduced corpus; both are compared
/// with the reference by embedding cosine and SSIM.
pub fn closed_loop_trial(
    world: &ToyWorld<'_>,
    prompt: &str,
    config: &GeneratorConfig,
    influence_config: &InfluenceConfig,
    strategy: ExclusionStrategy,
) -> Result<TrialResult> {
    let index = build_index(world.corpus)?;
    let draw = |index: &TfIdfIndex, offset: u64| {
        let cfg = GeneratorConfig {
            noise_seed: config.noise_seed.wrapping_add(offset),
            ..*config
        };
        generate(index, world.images, prompt, &cfg)
    };

    let reference = draw(&index, 0)?;
    let before = draw(&index, 1)?;
    let traced = embed_as_generated(world, reference.image.clone());
    let report = data_influence(prompt, &traced, &index, world.store, world.images, influence_config)?;

    let excluded = choose_exclusions(world.corpus, &report.influential, strategy);
    let reduced = world.corpus.exclude(&excluded)?;
    let reduced_index = build_index(&reduced)?;
    let after = draw(&reduced_index, 2)?;

    let before_emb = world.embedder.embed(&before.image);
    let after_emb = world.embedder.embed(&after.image);
    let before_stats = compare_outputs(Stage::Before, &traced.embedding, &[before_emb])?;
    let after_stats = compare_outputs(Stage::After, &traced.embedding, &[after_emb])?;
    let reference_luma = reference.image.luma();
    let ssim_before = compute_ssim(&reference_luma, &before.image.luma())?;
    let ssim_after = compute_ssim(&reference_luma, &after.image.luma())?;

    Ok(TrialResult {
        prompt: prompt.to_string(),
        strategy,
        sources: reference.source_ids().map(String::from).collect(),
        influential: report.influential.clone(),
        excluded,
        sources_after: after.source_ids().map(String::from).collect(),
        before_similarity: before_stats.mean,
        after_similarity: after_stats.mean,
        similarity_drop: before_stats.mean - after_stats.mean,
        ssim_before,
        ssim_after,
        report,
        before_image: None,
        after_image: None,
        images: Some(TrialImages {
            reference: reference.image,
            before: before.image,
            after: after.image,
        }),
    })
}

/// A batch of trials summarised as one before/after table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub trials: Vec<TrialResult>,
    pub before: UnlearnStats,
    pub after: UnlearnStats,
    pub summary: SummaryRow,
}

pub fn run_experiment<S: AsRef<str>>(
    world: &ToyWorld<'_>,
    prompts: &[S],
    config: &GeneratorConfig,
    influence_config: &InfluenceConfig,
    strategy: ExclusionStrategy,
) -> Result<Experiment> {
    let trials = prompts
        .iter()
        .map(|p| closed_loop_trial(world, p.as_ref(), config, influence_config, strategy))
        .collect::<Result<Vec<_>>>()?;
    let before = UnlearnStats::from_similarities(Stage::Before, trials.iter().map(|t| t.before_similarity).collect())?
        .with_ssim(&trials.iter().map(|t| t.ssim_before).collect::<Vec<_>>());
    let after = UnlearnStats::from_similarities(Stage::After, trials.iter().map(|t| t.after_similarity).collect())?
        .with_ssim(&trials.iter().map(|t| t.ssim_after).collect::<Vec<_>>());
    let summary = summarize(&before, &after);
    Ok(Experiment {
        trials,
        before,
        after,
        summary,
    })
}
