//! Large-scale approximation: prompts are simplified, sent to an image search
//! provider, and the retrieved images are compared with the generated one.
//!
//! Retrieved files land in a content-addressed cache:
//!
//! ```text
//! <cache>/<query-hash>/<content-hash>.<ext>
//! <cache>/<query-hash>/provenance.jsonl
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, TrainingSample};
use crate::error::{Error, Result};
use crate::image_features::{load_image_raw, EmbeddingStore, Resolution};
use crate::lexicon::{self, word_spans, WordList};
use crate::toy_generator::Embedder;
use crate::unlearn_eval::{compare_outputs, Stage, UnlearnStats};

pub const DEFAULT_MAX_PROMPT_LEN: usize = 170;
pub const DEFAULT_IMAGES_PER_PROMPT: usize = 30;
pub const DEFAULT_IN_FLIGHT: usize = 4;
pub const PROVENANCE_FILE: &str = "provenance.jsonl";
/// Environment variable holding the live search endpoint.
pub const ENDPOINT_ENV: &str = "DATATRACE_SEARCH_ENDPOINT";

/// One user prompt as collected upstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub text: String,
    /// Prompts that came with a reference image are not searchable.
    #[serde(default)]
    pub has_reference_image: bool,
}

pub fn load_prompts(path: &Path) -> Result<Vec<PromptRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::MalformedInput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Splits prompts into those shorter than `max_len` characters and the rest.
/// Prompts flagged with a reference image are dropped.
pub fn filter_prompts(prompts: &[PromptRecord], max_len: usize) -> (Vec<PromptRecord>, Vec<PromptRecord>) {
    prompts
        .iter()
        .filter(|p| !p.has_reference_image)
        .cloned()
        .partition(|p| p.text.chars().count() < max_len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pos {
    Noun,
    Verb,
    Other,
}

/// Part-of-speech lookup used by [`simplify_prompt`].
pub trait PosTagger {
    fn tag(&self, word: &str) -> Pos;
}

/// Tags words by membership in noun and verb lists.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    pub nouns: WordList,
    pub verbs: WordList,
}

impl Default for LexiconTagger {
    fn default() -> Self {
        Self {
            nouns: WordList::parse(lexicon::NOUNS),
            verbs: WordList::parse(lexicon::VERBS),
        }
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, word: &str) -> Pos {
        if self.nouns.contains(word) {
            Pos::Noun
        } else if self.verbs.contains(word) {
            Pos::Verb
        } else {
            Pos::Other
        }
    }
}

pub fn default_stopwords() -> WordList {
    WordList::parse(lexicon::STOPWORDS)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplifiedPrompt {
    pub text: String,
    /// Set when no noun or verb was found and only stop-words were stripped.
    pub fallback: bool,
}

/// Keeps the nouns and verbs of `text` in their original order.
pub fn simplify_prompt(text: &str, tagger: &dyn PosTagger, stopwords: &WordList) -> SimplifiedPrompt {
    let words: Vec<&str> = word_spans(text).into_iter().map(|(s, e)| &text[s..e]).collect();
    let kept: Vec<&str> = words
        .iter()
        .copied()
        .filter(|w| matches!(tagger.tag(w), Pos::Noun | Pos::Verb))
        .collect();
    if !kept.is_empty() {
        return SimplifiedPrompt {
            text: kept.join(" "),
            fallback: false,
        };
    }
    let stripped: Vec<&str> = words.into_iter().filter(|w| !stopwords.contains(w)).collect();
    SimplifiedPrompt {
        text: stripped.join(" "),
        fallback: true,
    }
}

/// A search query derived from one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedQuery {
    pub prompt_id: String,
    pub query: String,
    /// The prompt was too long and was simplified before searching.
    pub simplified: bool,
    /// Simplification found no noun or verb.
    pub fallback: bool,
}

/// Short prompts are searched verbatim; long ones are simplified and rejoin
/// the pool with `simplified` set. Queries that end up empty are skipped.
pub fn prepare_queries(
    prompts: &[PromptRecord],
    max_len: usize,
    tagger: &dyn PosTagger,
    stopwords: &WordList,
) -> Vec<PreparedQuery> {
    let (short, long) = filter_prompts(prompts, max_len);
    let long_ids: std::collections::HashSet<&str> = long.iter().map(|p| p.id.as_str()).collect();
    prompts
        .iter()
        .filter(|p| !p.has_reference_image)
        .filter_map(|p| {
            if long_ids.contains(p.id.as_str()) {
                let s = simplify_prompt(&p.text, tagger, stopwords);
                if s.text.is_empty() {
                    log::warn!("prompt {} has no searchable words after simplification", p.id);
                    return None;
                }
                Some(PreparedQuery {
                    prompt_id: p.id.clone(),
                    query: s.text,
                    simplified: true,
                    fallback: s.fallback,
                })
            } else {
                debug_assert!(short.iter().any(|q| q.id == p.id));
                Some(PreparedQuery {
                    prompt_id: p.id.clone(),
                    query: p.text.trim().to_string(),
                    simplified: false,
                    fallback: false,
                })
            }
        })
        .collect()
}

/// An image search backend: `search` lists result urls, `fetch` downloads one.
pub trait SearchProvider: Sync {
    fn name(&self) -> &str;
    fn search(&self, query: &str, count: usize) -> Result<Vec<String>>;
    fn fetch(&self, url: &str) -> Result<Vec<u8>>;
}

const FIXTURE_SCHEME: &str = "fixture://";

/// Offline provider serving the image files of one directory, in name order,
/// for every query.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    dir: PathBuf,
    files: Vec<String>,
}

impl FixtureProvider {
    pub fn new(dir: &Path) -> Result<Self> {
        let entries = fs::read_dir(dir)
            .map_err(|e| Error::ProviderUnavailable(format!("fixture directory {}: {e}", dir.display())))?;
        let mut files: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|name| {
                let lower = name.to_lowercase();
                [".png", ".jpg", ".jpeg"].iter().any(|ext| lower.ends_with(ext))
            })
            .collect();
        files.sort();
        Ok(Self {
            dir: dir.to_path_buf(),
            files,
        })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl SearchProvider for FixtureProvider {
    fn name(&self) -> &str {
        "fixture"
    }

    fn search(&self, _query: &str, count: usize) -> Result<Vec<String>> {
        Ok(self
            .files
            .iter()
            .take(count)
            .map(|f| format!("{FIXTURE_SCHEME}{f}"))
            .collect())
    }

    fn fetch(&self, url: &str) -> Result<Vec<u8>> {
        let name = url
            .strip_prefix(FIXTURE_SCHEME)
            .filter(|n| self.files.iter().any(|f| f == n))
            .ok_or_else(|| Error::ProviderUnavailable(format!("unknown fixture url {url}")))?;
        let path = self.dir.join(name);
        fs::read(&path).map_err(|e| Error::ProviderUnavailable(format!("{}: {e}", path.display())))
    }
}

/// Exponential backoff for transient provider failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay() -> Self {
        Self {
            base_delay: Duration::ZERO,
            ..Self::default()
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt)
    }

    /// Runs `op`, retrying ProviderUnavailable and RateLimited failures.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            match op() {
                Err(e @ (Error::ProviderUnavailable(_) | Error::RateLimited)) if attempt < self.max_retries => {
                    let wait = self.delay(attempt);
                    log::warn!("provider error ({e}); retrying in {wait:?}");
                    thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Audit record written for every cached download.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub query: String,
    pub url: String,
    pub content_hash: String,
    /// File name inside the query directory.
    pub file: String,
    pub provider: String,
    /// Unix seconds.
    pub fetched_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievedImage {
    pub url: String,
    pub content_hash: String,
    pub path: PathBuf,
}

/// Content-addressed download cache.
#[derive(Debug)]
pub struct ImageCache {
    root: PathBuf,
    provenance_lock: Mutex<()>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn extension_for(bytes: &[u8]) -> &'static str {
    match image::guess_format(bytes) {
        Ok(image::ImageFormat::Png) => "png",
        Ok(image::ImageFormat::Jpeg) => "jpg",
        _ => "bin",
    }
}

impl ImageCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            provenance_lock: Mutex::new(()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn query_dir(&self, query: &str) -> PathBuf {
        self.root.join(&sha256_hex(query.as_bytes())[..16])
    }

    /// Provenance records of `query`, in write order.
    pub fn provenance(&self, query: &str) -> Result<Vec<ProvenanceRecord>> {
        let path = self.query_dir(query).join(PROVENANCE_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&path, e)),
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                    line: i + 1,
                    reason: format!("{}: {e}", path.display()),
                })
            })
            .collect()
    }

    /// Stores `bytes` atomically and appends a provenance record.
    pub fn store(&self, query: &str, url: &str, provider: &str, bytes: &[u8]) -> Result<RetrievedImage> {
        let (image, record) = self.write_image(query, url, provider, bytes)?;
        self.append_provenance(query, &[record])?;
        Ok(image)
    }

    /// Writes the image file only; the caller records provenance so that
    /// concurrent downloads can be logged in a fixed order.
    fn write_image(
        &self,
        query: &str,
        url: &str,
        provider: &str,
        bytes: &[u8],
    ) -> Result<(RetrievedImage, ProvenanceRecord)> {
        let dir = self.query_dir(query);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let content_hash = sha256_hex(bytes);
        let file = format!("{content_hash}.{}", extension_for(bytes));
        let path = dir.join(&file);
        if !path.exists() {
            static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);
            let tmp = dir.join(format!(
                ".{content_hash}.{}.{}.tmp",
                std::process::id(),
                TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
            ));
            fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
            fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        }

        let record = ProvenanceRecord {
            query: query.to_string(),
            url: url.to_string(),
            content_hash: content_hash.clone(),
            file,
            provider: provider.to_string(),
            fetched_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let image = RetrievedImage {
            url: url.to_string(),
            content_hash,
            path,
        };
        Ok((image, record))
    }

    fn append_provenance(&self, query: &str, records: &[ProvenanceRecord]) -> Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let text: String = records
            .iter()
            .map(|r| serde_json::to_string(r).expect("provenance serializes") + "\n")
            .collect();
        let prov = self.query_dir(query).join(PROVENANCE_FILE);
        let _guard = self.provenance_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&prov)
            .map_err(|e| Error::io(&prov, e))?;
        // One write per batch so concurrent appenders never interleave.
        f.write_all(text.as_bytes()).map_err(|e| Error::io(&prov, e))
    }
}

/// Search options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub count: usize,
    pub in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            count: DEFAULT_IMAGES_PER_PROMPT,
            in_flight: DEFAULT_IN_FLIGHT,
            retry: RetryPolicy::default(),
        }
    }
}

/// Retrieves up to `options.count` images for `query` into `cache`.
///
/// Urls already cached for this query are not downloaded again. Results keep
/// the provider's order.
pub fn search_images(
    provider: &dyn SearchProvider,
    cache: &ImageCache,
    query: &str,
    options: &SearchOptions,
) -> Result<Vec<RetrievedImage>> {
    if options.in_flight == 0 {
        return Err(Error::InvalidConfig("in-flight limit must be >= 1".into()));
    }
    let mut urls = options.retry.run(|| provider.search(query, options.count))?;
    let mut seen = std::collections::HashSet::new();
    urls.retain(|u| seen.insert(u.clone()));
    urls.truncate(options.count);

    let dir = cache.query_dir(query);
    let mut known: HashMap<String, RetrievedImage> = HashMap::new();
    for rec in cache.provenance(query)? {
        let path = dir.join(&rec.file);
        if path.exists() {
            known.insert(
                rec.url.clone(),
                RetrievedImage {
                    url: rec.url,
                    content_hash: rec.content_hash,
                    path,
                },
            );
        }
    }

    let missing: Vec<&String> = urls.iter().filter(|u| !known.contains_key(*u)).collect();
    let next = AtomicUsize::new(0);
    type Fetched = Result<(RetrievedImage, ProvenanceRecord)>;
    let fetched: Mutex<BTreeMap<usize, Fetched>> = Mutex::new(BTreeMap::new());
    thread::scope(|scope| {
        for _ in 0..options.in_flight.min(missing.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(url) = missing.get(i) else { break };
                let result = options
                    .retry
                    .run(|| provider.fetch(url))
                    .and_then(|bytes| cache.write_image(query, url, provider.name(), &bytes));
                fetched.lock().unwrap_or_else(|e| e.into_inner()).insert(i, result);
            });
        }
    });
    // Provenance follows provider order, not completion order.
    let mut records = Vec::new();
    let mut first_error = None;
    for (i, result) in fetched.into_inner().unwrap_or_else(|e| e.into_inner()) {
        match result {
            Ok((image, record)) => {
                known.insert(missing[i].clone(), image);
                records.push(record);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    cache.append_provenance(query, &records)?;
    if let Some(e) = first_error {
        return Err(e);
    }

    Ok(urls.into_iter().filter_map(|u| known.remove(&u)).collect())
}

/// Similarity of retrieved images to the generated one.
pub fn compare_retrieved(generated: &[f64], retrieved: &[Vec<f64>]) -> Result<UnlearnStats> {
    compare_outputs(Stage::Retrieved, generated, retrieved)
}

/// Images retrieved for one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    #[serde(flatten)]
    pub query: PreparedQuery,
    pub images: Vec<RetrievedImage>,
}

/// Runs every query through [`search_images`], in order.
pub fn fetch_all(
    provider: &dyn SearchProvider,
    cache: &ImageCache,
    queries: &[PreparedQuery],
    options: &SearchOptions,
) -> Result<Vec<QueryResult>> {
    queries
        .iter()
        .map(|q| {
            let images = search_images(provider, cache, &q.query, options)?;
            log::info!("{}: {} images for {:?}", q.prompt_id, images.len(), q.query);
            Ok(QueryResult {
                query: q.clone(),
                images,
            })
        })
        .collect()
}

/// Lists every distinct retrieved image as a manifest keyed by content hash,
/// so an external embedder can produce the matching sidecar.
pub fn retrieval_corpus(results: &[QueryResult]) -> Result<Corpus> {
    let mut seen = std::collections::HashSet::new();
    let samples: Vec<TrainingSample> = results
        .iter()
        .flat_map(|r| r.images.iter().map(move |img| (r, img)))
        .filter(|(_, img)| seen.insert(img.content_hash.clone()))
        .map(|(r, img)| TrainingSample {
            id: img.content_hash.clone(),
            caption: r.query.query.clone(),
            image_path: img.path.clone(),
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyOutputs);
    }
    Corpus::new(samples, PathBuf::new())
}

/// Embeds every retrieved image with `embedder`, keyed by content hash.
pub fn embed_retrieved(
    results: &[QueryResult],
    embedder: &dyn Embedder,
    dim: usize,
    resolution: Resolution,
) -> Result<EmbeddingStore> {
    let mut store = EmbeddingStore::new(dim, embedder.model_tag());
    for img in results.iter().flat_map(|r| &r.images) {
        if store.get(&img.content_hash).is_none() {
            let raw = load_image_raw(&img.path, resolution)?;
            store.insert(&img.content_hash, embedder.embed(&raw))?;
        }
    }
    Ok(store)
}

/// Per-prompt output of the websearch flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStats {
    pub prompt_id: String,
    pub query: String,
    pub simplified: bool,
    pub fallback: bool,
    pub retrieved: usize,
    pub stats: UnlearnStats,
}

/// Scores each prompt's retrieved images against its generated embedding.
///
/// `generated` is keyed by prompt id, `retrieved` by content hash; both must
/// come from the same embedder.
pub fn score_results(
    results: &[QueryResult],
    generated: &EmbeddingStore,
    retrieved: &EmbeddingStore,
) -> Result<Vec<PromptStats>> {
    if generated.model_tag() != retrieved.model_tag() {
        return Err(Error::InvalidConfig(format!(
            "embedding model mismatch: generated {:?}, retrieved {:?}",
            generated.model_tag(),
            retrieved.model_tag()
        )));
    }
    results
        .iter()
        .filter(|r| !r.images.is_empty())
        .map(|r| {
            let gen = generated
                .get(&r.query.prompt_id)
                .ok_or_else(|| Error::MissingEmbedding(r.query.prompt_id.clone()))?;
            let outputs = r
                .images
                .iter()
                .map(|img| {
                    retrieved
                        .get(&img.content_hash)
                        .map(<[f64]>::to_vec)
                        .ok_or_else(|| Error::MissingEmbedding(img.content_hash.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PromptStats {
                prompt_id: r.query.prompt_id.clone(),
                query: r.query.query.clone(),
                simplified: r.query.simplified,
                fallback: r.query.fallback,
                retrieved: r.images.len(),
                stats: compare_retrieved(gen, &outputs)?,
            })
        })
        .collect()
}

/// Aggregate over all per-prompt similarities.
pub fn aggregate(stats: &[PromptStats]) -> Result<UnlearnStats> {
    let all: Vec<f64> = stats
        .iter()
        .flat_map(|s| s.stats.similarities.iter().copied())
        .collect();
    UnlearnStats::from_similarities(Stage::Retrieved, all)
}

#[cfg(feature = "live")]
pub use live::LiveProvider;

#[cfg(feature = "live")]
mod live {
    use super::*;

    /// HTTP provider. The endpoint answers `GET <endpoint>?q=<query>&count=<n>`
    /// with `{"results": [{"url": ...}, ...]}`.
    #[derive(Debug)]
    pub struct LiveProvider {
        endpoint: String,
        client: reqwest::blocking::Client,
    }

    impl LiveProvider {
        pub fn new(endpoint: impl Into<String>) -> Result<Self> {
            let client = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(20))
                .build()
                .map_err(|e| Error::ProviderUnavailable(e.to_string()))?;
            Ok(Self {
                endpoint: endpoint.into(),
                client,
            })
        }

        pub fn from_env() -> Result<Self> {
            let endpoint =
                std::env::var(ENDPOINT_ENV).map_err(|_| Error::InvalidConfig(format!("{ENDPOINT_ENV} is not set")))?;
            Self::new(endpoint)
        }

        fn get(&self, url: &str) -> Result<Vec<u8>> {
            let resp = self
                .client
                .get(url)
                .send()
                .map_err(|e| Error::ProviderUnavailable(e.to_string()))?;
            match resp.status().as_u16() {
                429 => Err(Error::RateLimited),
                s if !(200..300).contains(&s) => Err(Error::ProviderUnavailable(format!("HTTP {s} from {url}"))),
                _ => resp
                    .bytes()
                    .map(|b| b.to_vec())
                    .map_err(|e| Error::ProviderUnavailable(e.to_string())),
            }
        }
    }

    fn encode_component(s: &str) -> String {
        s.bytes()
            .map(|b| match b {
                b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
                _ => format!("%{b:02X}"),
            })
            .collect()
    }

    #[derive(Deserialize)]
    struct SearchResponse {
        results: Vec<SearchHit>,
    }

    #[derive(Deserialize)]
    struct SearchHit {
        url: String,
    }

    impl SearchProvider for LiveProvider {
        fn name(&self) -> &str {
            "live"
        }

        fn search(&self, query: &str, count: usize) -> Result<Vec<String>> {
            let sep = if self.endpoint.contains('?') { '&' } else { '?' };
            let url = format!("{}{sep}q={}&count={count}", self.endpoint, encode_component(query));
            let body = self.get(&url)?;
            let parsed: SearchResponse = serde_json::from_slice(&body)
                .map_err(|e| Error::ProviderUnavailable(format!("bad search response: {e}")))?;
            Ok(parsed.results.into_iter().take(count).map(|h| h.url).collect())
        }

        fn fetch(&self, url: &str) -> Result<Vec<u8>> {
            self.get(url)
        }
    }
}
