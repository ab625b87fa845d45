use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use datatrace_core::corpus::{Corpus, TrainingSample};
use datatrace_core::fixture::{build_fixture, write_fixture};
use datatrace_core::image_features::{DiskImages, GENERATED_ID};
use datatrace_core::influence::{render_ranking, InfluenceReport};
use datatrace_core::retrieval::Cutoff;
use datatrace_core::toy_generator::{ExclusionStrategy, ToyWorld, TrialResult, WeightMode};
use datatrace_core::unlearn_eval::{exclusion_manifest, generate_prompts, render_table, summarize, MutationLexicon};
use datatrace_core::websearch::{self, ImageCache, SearchOptions, SearchProvider};
use datatrace_core::{
    build_index, closed_loop_trial, compare_outputs, compute_ssim, data_influence, load_embeddings, load_image_raw,
    load_index, load_manifest, save_index, Embedder, EmbeddingStore, Error, GeneratedImage, GeneratorConfig,
    ImageSource, PooledColorEmbedder, Resolution, Result, Stage, TfIdfIndex, UnlearnStats,
};
use serde::Serialize;

use crate::config::{default_cutoff, ProviderKind, RunConfig};

/// Candidate count used by `simulate` when no cutoff is configured; small
/// corpora need more than the 0.2% default to leave room for an influential set.
const SIMULATE_TOP_K: usize = 50;

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    print_text(&(serde_json::to_string_pretty(value).expect("output serializes") + "\n"))
}

/// A reader that closed the pipe early (`| head`) is not an error.
fn print_text(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("output serializes") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::MalformedInput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedInput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Loads `--index` when given, otherwise builds one from `corpus`.
fn index_for(config: &RunConfig, corpus: Option<&Corpus>) -> Result<TfIdfIndex> {
    match (&config.index, corpus) {
        (Some(path), _) => load_index(path),
        (None, Some(corpus)) => build_index(corpus),
        (None, None) => Err(Error::InvalidConfig("--index or --manifest is required".into())),
    }
}

fn check_same_model(a: &EmbeddingStore, b: &EmbeddingStore) -> Result<()> {
    if a.model_tag() != b.model_tag() {
        return Err(Error::InvalidConfig(format!(
            "embeddings come from different models: {:?} and {:?}",
            a.model_tag(),
            b.model_tag()
        )));
    }
    Ok(())
}

/// The generated-image row of a sidecar: id `generated`, or the only row.
fn generated_vector(store: &EmbeddingStore) -> Result<Vec<f64>> {
    if let Some(v) = store.get(GENERATED_ID) {
        return Ok(v.to_vec());
    }
    match store.ids() {
        [only] => Ok(store.get(only).expect("id listed").to_vec()),
        _ => Err(Error::MissingEmbedding(GENERATED_ID.into())),
    }
}

fn all_vectors(store: &EmbeddingStore) -> Vec<Vec<f64>> {
    store
        .ids()
        .iter()
        .map(|id| store.get(id).expect("id listed").to_vec())
        .collect()
}

#[derive(Serialize)]
struct IndexSummary<'a> {
    index: &'a Path,
    doc_count: usize,
    vocab_size: usize,
}

pub fn index(config: &RunConfig) -> Result<()> {
    let manifest = RunConfig::require(&config.manifest, "manifest")?;
    let out = RunConfig::require(&config.index, "index")?;
    let corpus = load_manifest(manifest)?;
    let index = build_index(&corpus)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_index(&index, out)?;
    print_json(&IndexSummary {
        index: out,
        doc_count: index.doc_count(),
        vocab_size: index.vocab_size(),
    })
}

pub fn retrieve(config: &RunConfig, prompt: &str) -> Result<()> {
    let corpus = match (&config.index, &config.manifest) {
        (None, Some(path)) => Some(load_manifest(path)?),
        _ => None,
    };
    let index = index_for(config, corpus.as_ref())?;
    let result = datatrace_core::retrieve(&index, prompt, config.cutoff_or(default_cutoff())?)?;
    print_json(&result)
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub prompt: String,
    /// The generated image to attribute.
    #[arg(long)]
    pub generated: PathBuf,
    /// Sidecar holding the generated image's embedding; defaults to the
    /// `generated` row of --embeddings.
    #[arg(long)]
    pub generated_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
}

pub fn trace(config: &RunConfig, args: &TraceArgs) -> Result<()> {
    let corpus = load_manifest(RunConfig::require(&config.manifest, "manifest")?)?;
    let store = load_embeddings(RunConfig::require(&config.embeddings, "embeddings")?)?;
    let index = index_for(config, Some(&corpus))?;
    let influence = config.influence(default_cutoff())?;
    let resolution = Resolution::new(args.height, args.width);

    let embedding = match &args.generated_embeddings {
        Some(path) => {
            let own = load_embeddings(path)?;
            check_same_model(&store, &own)?;
            generated_vector(&own)?
        }
        None => store
            .get(GENERATED_ID)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::MissingEmbedding(GENERATED_ID.into()))?,
    };
    let generated = GeneratedImage {
        id: GENERATED_ID.into(),
        raw: load_image_raw(&args.generated, resolution)?,
        embedding,
    };
    let images = DiskImages::new(&corpus, resolution);
    let report = data_influence(&args.prompt, &generated, &index, &store, &images, &influence)?;

    if let Some(dir) = &config.out_dir {
        create_dir(dir)?;
        write_json(&dir.join("report.json"), &report)?;
        write_text(&dir.join("ranking.txt"), &render_ranking(&report))?;
    }
    print_json(&report)
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Influence report written by `trace`.
    #[arg(long)]
    pub report: PathBuf,
    /// Sidecar with the reference output's embedding.
    #[arg(long)]
    pub reference_embeddings: PathBuf,
    /// Sidecar with one row per output generated before exclusion.
    #[arg(long)]
    pub before_embeddings: PathBuf,
    /// Sidecar with one row per output generated after exclusion.
    #[arg(long)]
    pub after_embeddings: PathBuf,
    /// Reference image for the optional SSIM check.
    #[arg(long, requires = "before_image")]
    pub reference_image: Option<PathBuf>,
    #[arg(long, requires = "reference_image")]
    pub before_image: Vec<PathBuf>,
    #[arg(long, requires = "reference_image")]
    pub after_image: Vec<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
}

#[derive(Serialize)]
struct Evaluation {
    excluded: Vec<String>,
    before: UnlearnStats,
    after: UnlearnStats,
    summary: datatrace_core::unlearn_eval::SummaryRow,
}

fn mean_ssim(reference: &Path, outputs: &[PathBuf], resolution: Resolution) -> Result<Vec<f64>> {
    let reference = load_image_raw(reference, resolution)?.luma();
    outputs
        .iter()
        .map(|p| compute_ssim(&reference, &load_image_raw(p, resolution)?.luma()))
        .collect()
}

pub fn evaluate(config: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    let out_dir = RunConfig::require(&config.out_dir, "out-dir")?;
    let report: InfluenceReport = read_json(&args.report)?;
    create_dir(out_dir)?;
    let excluded = exclusion_manifest(&report, config.top_fraction, &out_dir.join("exclusion.txt"))?;

    if let Some(path) = &config.manifest {
        let corpus = load_manifest(path)?;
        let reduced = corpus.exclude(&excluded)?;
        // Paths are resolved so the reduced manifest works from any directory.
        let samples = reduced
            .samples()
            .iter()
            .map(|s| TrainingSample {
                image_path: reduced.image_path(s),
                ..s.clone()
            })
            .collect();
        Corpus::new(samples, PathBuf::new())?.write_manifest(&out_dir.join("manifest.reduced.jsonl"))?;
    }

    let reference = load_embeddings(&args.reference_embeddings)?;
    let before = load_embeddings(&args.before_embeddings)?;
    let after = load_embeddings(&args.after_embeddings)?;
    check_same_model(&reference, &before)?;
    check_same_model(&reference, &after)?;
    let reference = generated_vector(&reference)?;
    let mut before = compare_outputs(Stage::Before, &reference, &all_vectors(&before))?;
    let mut after = compare_outputs(Stage::After, &reference, &all_vectors(&after))?;
    if let Some(image) = &args.reference_image {
        let resolution = Resolution::new(args.height, args.width);
        before = before.with_ssim(&mean_ssim(image, &args.before_image, resolution)?);
        if !args.after_image.is_empty() {
            after = after.with_ssim(&mean_ssim(image, &args.after_image, resolution)?);
        }
    }

    let summary = summarize(&before, &after);
    write_text(
        &out_dir.join("summary.txt"),
        &render_table(std::slice::from_ref(&summary)),
    )?;
    let evaluation = Evaluation {
        excluded,
        before,
        after,
        summary,
    };
    write_json(&out_dir.join("summary.json"), &evaluation)?;
    print_json(&evaluation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    /// Remove the traced influential set.
    Influential,
    /// Remove an equally sized random set from outside it.
    Random,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of mutated prompts drawn from the corpus captions.
    #[arg(long, default_value_t = 15)]
    pub prompts: usize,
    /// Explicit prompts; replaces the drawn ones.
    #[arg(long = "prompt")]
    pub prompt: Vec<String>,
    /// Training images blended per generation.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Standard deviation of generator pixel noise; 0 keeps generation deterministic.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Influential)]
    pub strategy: StrategyArg,
    /// Blend weights follow retrieval scores instead of being uniform.
    #[arg(long)]
    pub text_weights: bool,
    /// Size of the in-memory fixture used when no --manifest is given.
    #[arg(long, default_value_t = datatrace_core::fixture::DEFAULT_FIXTURE_SIZE)]
    pub fixture_count: usize,
}

#[derive(Serialize)]
struct Simulation<'a> {
    before: &'a UnlearnStats,
    after: &'a UnlearnStats,
    summary: &'a datatrace_core::unlearn_eval::SummaryRow,
    trials: &'a [TrialResult],
}

pub fn simulate(config: &RunConfig, args: &SimulateArgs) -> Result<()> {
    let embedder = PooledColorEmbedder::default();
    let resolution = Resolution::default();
    let (corpus, images, store): (Corpus, Box<dyn ImageSource>, EmbeddingStore) = match &config.manifest {
        Some(path) => {
            let corpus = load_manifest(path)?;
            let store = load_embeddings(RunConfig::require(&config.embeddings, "embeddings")?)?;
            if store.model_tag() != embedder.model_tag() {
                return Err(Error::InvalidConfig(format!(
                    "simulate needs {:?} embeddings, sidecar has {:?}",
                    embedder.model_tag(),
                    store.model_tag()
                )));
            }
            let images = DiskImages::new(&corpus, resolution);
            (corpus, Box::new(images), store)
        }
        None => {
            let fixture = build_fixture(args.fixture_count, config.seed, resolution, Path::new("."))?;
            (fixture.corpus, Box::new(fixture.images), fixture.store)
        }
    };
    let world = ToyWorld {
        corpus: &corpus,
        images: images.as_ref(),
        store: &store,
        embedder: &embedder,
    };
    let prompts: Vec<String> = if args.prompt.is_empty() {
        generate_prompts(&corpus, args.prompts, config.seed, &MutationLexicon::default())?
            .into_iter()
            .map(|p| p.mutated_caption)
            .collect()
    } else {
        args.prompt.clone()
    };
    let influence = config.influence(Cutoff::TopK(SIMULATE_TOP_K))?;

    let mut trials = Vec::with_capacity(prompts.len());
    for (i, prompt) in prompts.iter().enumerate() {
        let trial_seed = config.seed.wrapping_add(1000 * i as u64);
        let generator = GeneratorConfig {
            k: args.k,
            resolution,
            weight_mode: if args.text_weights {
                WeightMode::TextScore
            } else {
                WeightMode::Uniform
            },
            epsilon: args.epsilon,
            noise_seed: trial_seed,
        };
        let strategy = match args.strategy {
            StrategyArg::Influential => ExclusionStrategy::Influential,
            StrategyArg::Random => ExclusionStrategy::RandomNonInfluential { seed: trial_seed },
        };
        let mut trial = closed_loop_trial(&world, prompt, &generator, &influence, strategy)?;
        log::info!("trial {i}: {prompt:?} drop {:.4}", trial.similarity_drop);
        if let (Some(dir), Some(images)) = (&config.out_dir, trial.images.take()) {
            create_dir(dir)?;
            let path = |stage: &str| dir.join(format!("trial-{i:02}-{stage}.png"));
            images.reference.save_png(&path("reference"))?;
            images.before.save_png(&path("before"))?;
            images.after.save_png(&path("after"))?;
            trial.before_image = Some(path("before"));
            trial.after_image = Some(path("after"));
        }
        trials.push(trial);
    }

    let before = UnlearnStats::from_similarities(Stage::Before, trials.iter().map(|t| t.before_similarity).collect())?
        .with_ssim(&trials.iter().map(|t| t.ssim_before).collect::<Vec<_>>());
    let after = UnlearnStats::from_similarities(Stage::After, trials.iter().map(|t| t.after_similarity).collect())?
        .with_ssim(&trials.iter().map(|t| t.ssim_after).collect::<Vec<_>>());
    let summary = summarize(&before, &after);
    let table = render_table(std::slice::from_ref(&summary));
    if let Some(dir) = &config.out_dir {
        write_text(&dir.join("summary.txt"), &table)?;
        write_json(
            &dir.join("trials.json"),
            &Simulation {
                before: &before,
                after: &after,
                summary: &summary,
                trials: &trials,
            },
        )?;
    }
    print_text(&table)
}

#[derive(Debug, Args)]
pub struct WebsearchArgs {
    /// Prompt file: JSON lines with `id`, `text` and optional `has_reference_image`.
    #[arg(long)]
    pub prompts: PathBuf,
    /// Image directory served by the fixture provider.
    #[arg(long)]
    pub fixture_dir: Option<PathBuf>,
    /// Download cache; defaults to `<out-dir>/cache`.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Images requested per prompt.
    #[arg(long, default_value_t = websearch::DEFAULT_IMAGES_PER_PROMPT)]
    pub count: usize,
    /// Prompts this long or longer are simplified before searching.
    #[arg(long, default_value_t = websearch::DEFAULT_MAX_PROMPT_LEN)]
    pub max_len: usize,
    /// Sidecar of generated-image embeddings keyed by prompt id.
    #[arg(long)]
    pub generated_embeddings: Option<PathBuf>,
    /// Sidecar of retrieved-image embeddings keyed by content hash.
    #[arg(long, conflicts_with = "toy_embedder")]
    pub retrieved_embeddings: Option<PathBuf>,
    /// Embed retrieved images with the built-in toy embedder.
    #[arg(long)]
    pub toy_embedder: bool,
}

fn provider(config: &RunConfig, args: &WebsearchArgs) -> Result<Box<dyn SearchProvider>> {
    match config.provider {
        ProviderKind::Fixture => {
            let dir = args
                .fixture_dir
                .as_ref()
                .or(config.fixture_dir.as_ref())
                .ok_or_else(|| Error::InvalidConfig("--fixture-dir is required for the fixture provider".into()))?;
            Ok(Box::new(websearch::FixtureProvider::new(dir)?))
        }
        #[cfg(feature = "live")]
        ProviderKind::Live => Ok(Box::new(match &config.endpoint {
            Some(endpoint) => websearch::LiveProvider::new(endpoint.clone())?,
            None => websearch::LiveProvider::from_env()?,
        })),
        #[cfg(not(feature = "live"))]
        ProviderKind::Live => Err(Error::InvalidConfig(
            "this build has no live provider; rebuild with --features live".into(),
        )),
    }
}

#[derive(Serialize)]
struct WebsearchOutput {
    prompts: Vec<websearch::PromptStats>,
    aggregate: Option<UnlearnStats>,
}

pub fn websearch(config: &RunConfig, args: &WebsearchArgs) -> Result<()> {
    let provider = provider(config, args)?;
    let cache_dir = match (&args.cache_dir, &config.cache_dir, &config.out_dir) {
        (Some(dir), _, _) | (None, Some(dir), _) => dir.clone(),
        (None, None, Some(out)) => out.join("cache"),
        (None, None, None) => return Err(Error::InvalidConfig("--cache-dir or --out-dir is required".into())),
    };
    let cache = ImageCache::new(cache_dir);
    let prompts = websearch::load_prompts(&args.prompts)?;
    let queries = websearch::prepare_queries(
        &prompts,
        args.max_len,
        &websearch::LexiconTagger::default(),
        &websearch::default_stopwords(),
    );
    let options = SearchOptions {
        count: args.count,
        ..SearchOptions::default()
    };
    let results = websearch::fetch_all(provider.as_ref(), &cache, &queries, &options)?;

    if let Some(dir) = &config.out_dir {
        create_dir(dir)?;
        write_json(&dir.join("queries.json"), &results)?;
        if results.iter().any(|r| !r.images.is_empty()) {
            websearch::retrieval_corpus(&results)?.write_manifest(&dir.join("retrieved.jsonl"))?;
        }
    }

    let Some(generated_path) = &args.generated_embeddings else {
        log::warn!("no --generated-embeddings; printing retrieval results only");
        return print_json(&results);
    };
    let generated = load_embeddings(generated_path)?;
    let retrieved = match (&args.retrieved_embeddings, args.toy_embedder) {
        (Some(path), _) => load_embeddings(path)?,
        (None, true) => {
            let embedder = PooledColorEmbedder::default();
            websearch::embed_retrieved(&results, &embedder, embedder.dim(), Resolution::default())?
        }
        (None, false) => {
            return Err(Error::InvalidConfig(
                "scoring needs --retrieved-embeddings or --toy-embedder".into(),
            ))
        }
    };
    let stats = websearch::score_results(&results, &generated, &retrieved)?;
    let aggregate = if stats.is_empty() {
        None
    } else {
        Some(websearch::aggregate(&stats)?)
    };
    print_json(&WebsearchOutput {
        prompts: stats,
        aggregate,
    })
}

pub fn fixture(dir: &Path, count: usize, seed: u64) -> Result<()> {
    let paths = write_fixture(dir, count, seed, Resolution::default())?;
    print_json(&serde_json::json!({
        "count": count,
        "seed": seed,
        "manifest": paths.manifest,
        "embeddings": paths.embeddings,
    }))
}
