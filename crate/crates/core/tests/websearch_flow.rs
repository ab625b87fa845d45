use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use datatrace_core::fixture::write_fixture;
use datatrace_core::websearch::{
    fetch_all, prepare_queries, retrieval_corpus, search_images, sha256_hex, FixtureProvider, ImageCache,
    LexiconTagger, PromptRecord, RetryPolicy, SearchOptions, SearchProvider,
};
use datatrace_core::{Error, Resolution, Result};

/// Wraps the fixture provider, counting calls and failing the first
/// `failures` fetches of every url.
struct Instrumented {
    inner: FixtureProvider,
    failures: usize,
    fetches: AtomicUsize,
    attempts: Mutex<std::collections::HashMap<String, usize>>,
    active: AtomicUsize,
    peak: AtomicUsize,
}

impl Instrumented {
    fn new(dir: &Path, failures: usize) -> Self {
        Self {
            inner: FixtureProvider::new(dir).unwrap(),
            failures,
            fetches: AtomicUsize::new(0),
            attempts: Mutex::default(),
            active: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        }
    }
}

impl SearchProvider for Instrumented {
    fn name(&self) -> &str {
        "instrumented"
    }

    fn search(&self, query: &str, count: usize) -> Result<Vec<String>> {
        let mut urls = self.inner.search(query, count)?;
        // providers may repeat themselves
        urls.insert(1, urls[0].clone());
        Ok(urls)
    }

    fn fetch(&self, url: &str) -> Result<Vec<u8>> {
        let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        // later urls finish first
        let digit = url
            .trim_end_matches(".png")
            .chars()
            .last()
            .and_then(|c| c.to_digit(10))
            .unwrap_or(0);
        std::thread::sleep(Duration::from_millis(2 + 2 * (9 - digit as u64)));
        self.active.fetch_sub(1, Ordering::SeqCst);
        let mut attempts = self.attempts.lock().unwrap();
        let n = attempts.entry(url.to_string()).or_insert(0);
        *n += 1;
        if *n <= self.failures {
            return Err(Error::RateLimited);
        }
        self.fetches.fetch_add(1, Ordering::SeqCst);
        self.inner.fetch(url)
    }
}

fn images_dir(dir: &Path) -> std::path::PathBuf {
    write_fixture(dir, 10, 3, Resolution::new(16, 16)).unwrap();
    dir.join("images")
}

fn options(in_flight: usize) -> SearchOptions {
    SearchOptions {
        count: 8,
        in_flight,
        retry: RetryPolicy::no_delay(),
    }
}

#[test]
fn results_keep_provider_order_and_drop_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Instrumented::new(&images_dir(dir.path()), 0);
    let cache = ImageCache::new(dir.path().join("cache"));
    let got = search_images(&provider, &cache, "red circle", &options(3)).unwrap();
    let urls: Vec<&str> = got.iter().map(|r| r.url.as_str()).collect();
    let expected = provider.inner.search("red circle", 8).unwrap();
    assert_eq!(urls, expected);
    for r in &got {
        assert_eq!(sha256_hex(&std::fs::read(&r.path).unwrap()), r.content_hash);
    }
}

#[test]
fn cached_urls_are_not_fetched_again() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Instrumented::new(&images_dir(dir.path()), 0);
    let cache = ImageCache::new(dir.path().join("cache"));
    let first = search_images(&provider, &cache, "q", &options(2)).unwrap();
    let fetched = provider.fetches.load(Ordering::SeqCst);
    assert_eq!(fetched, 8);
    let second = search_images(&provider, &cache, "q", &options(2)).unwrap();
    assert_eq!(provider.fetches.load(Ordering::SeqCst), fetched);
    assert_eq!(first, second);
    assert_eq!(cache.provenance("q").unwrap().len(), 8);
}

#[test]
fn provenance_follows_provider_order() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Instrumented::new(&images_dir(dir.path()), 0);
    let cache = ImageCache::new(dir.path().join("cache"));
    let got = search_images(&provider, &cache, "q", &options(8)).unwrap();
    let logged: Vec<String> = cache.provenance("q").unwrap().into_iter().map(|r| r.url).collect();
    let returned: Vec<String> = got.into_iter().map(|r| r.url).collect();
    assert_eq!(logged, returned);
}

#[test]
fn in_flight_limit_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Instrumented::new(&images_dir(dir.path()), 0);
    let cache = ImageCache::new(dir.path().join("cache"));
    search_images(&provider, &cache, "q", &options(2)).unwrap();
    assert!(provider.peak.load(Ordering::SeqCst) <= 2);
    assert!(matches!(
        search_images(&provider, &cache, "q", &options(0)),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn transient_failures_are_retried() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Instrumented::new(&images_dir(dir.path()), 3);
    let cache = ImageCache::new(dir.path().join("cache"));
    assert_eq!(search_images(&provider, &cache, "q", &options(4)).unwrap().len(), 8);

    let provider = Instrumented::new(&images_dir(dir.path()), 4);
    let cache = ImageCache::new(dir.path().join("cache2"));
    assert!(matches!(
        search_images(&provider, &cache, "q", &options(4)),
        Err(Error::RateLimited)
    ));
}

#[test]
fn missing_fixture_directory_is_unavailable() {
    assert!(matches!(
        FixtureProvider::new(Path::new("/nonexistent/fixtures")),
        Err(Error::ProviderUnavailable(_))
    ));
}

#[test]
fn retrieval_corpus_lists_each_image_once() {
    let dir = tempfile::tempdir().unwrap();
    let provider = FixtureProvider::new(&images_dir(dir.path())).unwrap();
    let cache = ImageCache::new(dir.path().join("cache"));
    let prompts: Vec<PromptRecord> = ["red circle", "blue square"]
        .iter()
        .enumerate()
        .map(|(i, t)| PromptRecord {
            id: format!("p{i}"),
            text: t.to_string(),
            has_reference_image: false,
        })
        .collect();
    let queries = prepare_queries(
        &prompts,
        170,
        &LexiconTagger::default(),
        &datatrace_core::websearch::default_stopwords(),
    );
    let results = fetch_all(&provider, &cache, &queries, &options(4)).unwrap();
    let corpus = retrieval_corpus(&results).unwrap();
    // both queries get the same first eight files
    assert_eq!(corpus.len(), 8);
    assert!(results[0].images.iter().all(|i| corpus.contains(&i.content_hash)));
}
