//! Unlearning evaluation: mutated test prompts, exclusion manifests,
//! before/after similarity statistics and SSIM structure checks.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TrainingSample};
use crate::error::{Error, Result};
use crate::image_features::{cosine, LumaPlane};
use crate::influence::{top_influential, InfluenceReport};
use crate::lexicon::{self, word_spans, WordList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    Color,
    Shape,
    Brand,
    NounSwap,
}

impl Mutation {
    const ALL: [Mutation; 4] = [Mutation::Color, Mutation::Shape, Mutation::Brand, Mutation::NounSwap];
}

/// Word lists driving prompt mutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationLexicon {
    pub colors: WordList,
    pub shapes: WordList,
    pub brands: WordList,
    pub garments: WordList,
}

impl Default for MutationLexicon {
    fn default() -> Self {
        Self {
            colors: WordList::parse(lexicon::COLORS),
            shapes: WordList::parse(lexicon::SHAPES),
            brands: WordList::parse(lexicon::BRANDS),
            garments: WordList::parse(lexicon::GARMENTS),
        }
    }
}

impl MutationLexicon {
    /// Loads `colors.txt`, `shapes.txt`, `brands.txt` and `garments.txt` from
    /// `dir`; missing files fall back to the shipped lists.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let defaults = Self::default();
        let load = |name: &str, fallback: WordList| -> Result<WordList> {
            let path = dir.join(name);
            if path.exists() {
                WordList::load(&path)
            } else {
                Ok(fallback)
            }
        };
        Ok(Self {
            colors: load("colors.txt", defaults.colors)?,
            shapes: load("shapes.txt", defaults.shapes)?,
            brands: load("brands.txt", defaults.brands)?,
            garments: load("garments.txt", defaults.garments)?,
        })
    }

    fn list(&self, rule: Mutation) -> &WordList {
        match rule {
            Mutation::Color => &self.colors,
            Mutation::Shape => &self.shapes,
            Mutation::Brand => &self.brands,
            Mutation::NounSwap => &self.garments,
        }
    }

    fn matches(&self, caption: &str, rule: Mutation) -> Vec<(usize, usize)> {
        let list = self.list(rule);
        word_spans(caption)
            .into_iter()
            .filter(|&(s, e)| list.contains(&caption[s..e]))
            .collect()
    }

    fn applicable(&self, caption: &str, rule: Mutation) -> bool {
        let hits = self.matches(caption, rule);
        if hits.is_empty() {
            return false;
        }
        // Substitution needs an alternative word; brand tokens can also be dropped.
        rule == Mutation::Brand || self.list(rule).len() > 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutatedPrompt {
    pub base_sample_id: String,
    pub original_caption: String,
    pub mutated_caption: String,
    pub mutation: Mutation,
}

/// Samples `n` captions (distinct while the corpus allows) and mutates each
/// with one applicable rule. Fully determined by `seed`.
pub fn generate_prompts(corpus: &Corpus, n: usize, seed: u64, lexicon: &MutationLexicon) -> Result<Vec<MutatedPrompt>> {
    if n == 0 {
        return Err(Error::InvalidConfig("prompt count must be >= 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mutable: Vec<&TrainingSample> = corpus
        .samples()
        .iter()
        .filter(|s| Mutation::ALL.iter().any(|&r| lexicon.applicable(&s.caption, r)))
        .collect();
    if mutable.is_empty() {
        return Err(Error::InsufficientMutableCaptions);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = index::sample(&mut rng, mutable.len(), n.min(mutable.len())).into_vec();
    while picks.len() < n {
        picks.push(rng.random_range(0..mutable.len()));
    }

    Ok(picks
        .into_iter()
        .map(|pos| {
            let sample = mutable[pos];
            let rules: Vec<Mutation> = Mutation::ALL
                .into_iter()
                .filter(|&r| lexicon.applicable(&sample.caption, r))
                .collect();
            let rule = *rules.choose(&mut rng).expect("sample is mutable");
            MutatedPrompt {
                base_sample_id: sample.id.clone(),
                original_caption: sample.caption.clone(),
                mutated_caption: mutate(&sample.caption, rule, lexicon, &mut rng),
                mutation: rule,
            }
        })
        .collect())
}

/// Applies `rule` to one matching word of `caption`.
pub fn mutate<R: Rng>(caption: &str, rule: Mutation, lexicon: &MutationLexicon, rng: &mut R) -> String {
    let hits = lexicon.matches(caption, rule);
    let &(start, end) = hits.choose(rng).expect("rule is applicable");
    let current = caption[start..end].to_lowercase();
    let alternatives: Vec<&str> = lexicon.list(rule).words().filter(|w| *w != current).collect();

    let drop_brand = rule == Mutation::Brand && (alternatives.is_empty() || rng.random_bool(0.5));
    if drop_brand {
        // Remove the token together with one neighbouring run of whitespace.
        let before = caption[..start].trim_end();
        let after = caption[end..].trim_start();
        return match (before.is_empty(), after.is_empty()) {
            (true, _) => after.to_string(),
            (_, true) => before.to_string(),
            _ => format!("{before} {after}"),
        };
    }

    let replacement = *alternatives.choose(rng).expect("alternatives exist");
    let original = &caption[start..end];
    let replacement = if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        chars
            .next()
            .map(|c| c.to_uppercase().chain(chars).collect())
            .unwrap_or_default()
    } else {
        replacement.to_string()
    };
    format!("{}{}{}", &caption[..start], replacement, &caption[end..])
}

/// Writes the influential ids of `report`, one per line, and returns them.
pub fn exclusion_manifest(report: &InfluenceReport, fraction: f64, path: &Path) -> Result<Vec<String>> {
    let ids = top_influential(report, fraction)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for id in &ids {
        writeln!(file, "{id}").map_err(|e| Error::io(path, e))?;
    }
    Ok(ids)
}

pub fn load_exclusion_manifest(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::MalformedInput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Before,
    After,
    /// Web-retrieved images compared with a generated one.
    Retrieved,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::Before => "Before",
            Stage::After => "After",
            Stage::Retrieved => "Retrieved",
        }
    }
}

/// Descriptive statistics of one stage's similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnStats {
    pub stage: Stage,
    pub similarities: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 when only one value exists.
    pub std: f64,
    /// False when `std` was forced to 0 because n = 1.
    pub std_defined: bool,
    pub min: f64,
    pub max: f64,
    pub ssim_mean: Option<f64>,
}

impl UnlearnStats {
    pub fn from_similarities(stage: Stage, similarities: Vec<f64>) -> Result<Self> {
        if similarities.is_empty() {
            return Err(Error::EmptyOutputs);
        }
        let n = similarities.len() as f64;
        let mean = similarities.iter().sum::<f64>() / n;
        let (std, std_defined) = if similarities.len() > 1 {
            let ss: f64 = similarities.iter().map(|s| (s - mean).powi(2)).sum();
            ((ss / (n - 1.0)).sqrt(), true)
        } else {
            (0.0, false)
        };
        let min = similarities.iter().copied().fold(f64::INFINITY, f64::min);
        let max = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            stage,
            // Guard the min <= mean <= max invariant against summation rounding.
            mean: mean.clamp(min, max),
            similarities,
            std,
            std_defined,
            min,
            max,
            ssim_mean: None,
        })
    }

    pub fn with_ssim(mut self, values: &[f64]) -> Self {
        if !values.is_empty() {
            self.ssim_mean = Some(values.iter().sum::<f64>() / values.len() as f64);
        }
        self
    }
}

/// Cosine of each output embedding against the reference embedding.
pub fn compare_outputs(stage: Stage, reference: &[f64], outputs: &[Vec<f64>]) -> Result<UnlearnStats> {
    if outputs.is_empty() {
        return Err(Error::EmptyOutputs);
    }
    let similarities = outputs
        .iter()
        .enumerate()
        .map(|(i, out)| {
            if out.len() != reference.len() {
                return Err(Error::DimMismatch {
                    id: format!("output[{i}]"),
                    expected: reference.len(),
                    got: out.len(),
                });
            }
            cosine(reference, out)
        })
        .collect::<Result<Vec<_>>>()?;
    UnlearnStats::from_similarities(stage, similarities)
}

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_RANGE: f64 = 1.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let centre = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - centre).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" filtering: output is (h - k + 1) x (w - k + 1).
fn filter_valid(data: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|i| kernel[i] * data[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| kernel[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all full Gaussian windows (11x11, sigma 1.5, K1 = 0.01,
/// K2 = 0.03, L = 1). Images smaller than the window use a window as large
/// as the smaller side.
pub fn compute_ssim(a: &LumaPlane, b: &LumaPlane) -> Result<f64> {
    if a.resolution != b.resolution {
        return Err(Error::ResolutionMismatch {
            left: (a.resolution.height, a.resolution.width),
            right: (b.resolution.height, b.resolution.width),
        });
    }
    let (h, w) = (a.resolution.height, a.resolution.width);
    if h == 0 || w == 0 {
        return Err(Error::InvalidConfig("SSIM of an empty image".into()));
    }
    let kernel = gaussian_kernel(SSIM_WINDOW.min(h).min(w), SSIM_SIGMA);
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);

    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() };
    let mu_a = filter_valid(&a.data, h, w, &kernel);
    let mu_b = filter_valid(&b.data, h, w, &kernel);
    let e_aa = filter_valid(&prod(|x, _| x * x), h, w, &kernel);
    let e_bb = filter_valid(&prod(|_, y| y * y), h, w, &kernel);
    let e_ab = filter_valid(&prod(|x, y| x * y), h, w, &kernel);

    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

/// One before/after row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub before_mean: f64,
    pub before_std: f64,
    pub before_range: (f64, f64),
    pub after_mean: f64,
    pub after_std: f64,
    pub after_range: (f64, f64),
    /// `before_mean - after_mean`; positive when similarity dropped.
    pub delta_mean: f64,
}

pub fn summarize(before: &UnlearnStats, after: &UnlearnStats) -> SummaryRow {
    SummaryRow {
        before_mean: before.mean,
        before_std: before.std,
        before_range: (before.min, before.max),
        after_mean: after.mean,
        after_std: after.std,
        after_range: (after.min, after.max),
        delta_mean: before.mean - after.mean,
    }
}

/// Renders rows as an aligned Stage/Mean/Std/Range table.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<4} {:<7} {:>6} {:>6}  {:<15} {:>7}",
        "exp", "Stage", "Mean", "Std", "Range", "Delta"
    );
    for (i, row) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<4} {:<7} {:>6.3} {:>6.3}  {:<15} {:>7}",
            i + 1,
            "Before",
            row.before_mean,
            row.before_std,
            format!("{:.3} - {:.3}", row.before_range.0, row.before_range.1),
            ""
        );
        let _ = writeln!(
            out,
            "{:<4} {:<7} {:>6.3} {:>6.3}  {:<15} {:>7.3}",
            "",
            "After",
            row.after_mean,
            row.after_std,
            format!("{:.3} - {:.3}", row.after_range.0, row.after_range.1),
            row.delta_mean
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_features::Resolution;
    use rand_distr::{Distribution, Normal};

    fn corpus_of(captions: &[&str]) -> Corpus {
        let samples = captions
            .iter()
            .enumerate()
            .map(|(i, c)| TrainingSample {
                id: format!("s{i:02}"),
                caption: c.to_string(),
                image_path: "x.png".into(),
            })
            .collect();
        Corpus::new(samples, ".").unwrap()
    }

    fn plane(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> LumaPlane {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        LumaPlane {
            data,
            resolution: Resolution::new(h, w),
        }
    }

    #[test]
    fn fifteen_prompts_deterministic() {
        let captions: Vec<String> = (0..40)
            .map(|i| format!("{} cotton shirt by nike model {i}", ["blue", "red", "green"][i % 3]))
            .collect();
        let refs: Vec<&str> = captions.iter().map(String::as_str).collect();
        let corpus = corpus_of(&refs);
        let lex = MutationLexicon::default();
        let a = generate_prompts(&corpus, 15, 7, &lex).unwrap();
        let b = generate_prompts(&corpus, 15, 7, &lex).unwrap();
        assert_eq!(a.len(), 15);
        assert_eq!(a, b);
        let mut bases: Vec<&str> = a.iter().map(|p| p.base_sample_id.as_str()).collect();
        bases.sort();
        bases.dedup();
        assert_eq!(bases.len(), 15);
        for p in &a {
            assert_ne!(p.mutated_caption, p.original_caption);
        }
        assert_ne!(a, generate_prompts(&corpus, 15, 8, &lex).unwrap());
    }

    #[test]
    fn color_rule_changes_only_the_color_token() {
        let lex = MutationLexicon::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let out = mutate("blue cotton shirt", Mutation::Color, &lex, &mut rng);
            let words: Vec<&str> = out.split(' ').collect();
            assert_eq!(words.len(), 3);
            assert_ne!(words[0], "blue");
            assert!(lex.colors.contains(words[0]));
            assert_eq!(&words[1..], ["cotton", "shirt"]);
        }
    }

    #[test]
    fn brand_rule_substitutes_or_drops() {
        let lex = MutationLexicon::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut dropped = false;
        let mut swapped = false;
        for _ in 0..40 {
            let out = mutate("Nike running shoes", Mutation::Brand, &lex, &mut rng);
            if out == "running shoes" {
                dropped = true;
            } else {
                let first = out.split(' ').next().unwrap();
                assert!(first.chars().next().unwrap().is_uppercase());
                assert!(lex.brands.contains(first));
                assert_ne!(first, "Nike");
                swapped = true;
            }
        }
        assert!(dropped && swapped);
    }

    #[test]
    fn unmutable_corpus_is_rejected() {
        let corpus = corpus_of(&["plain words only", "nothing here"]);
        assert!(matches!(
            generate_prompts(&corpus, 3, 1, &MutationLexicon::default()),
            Err(Error::InsufficientMutableCaptions)
        ));
    }

    #[test]
    fn small_corpus_repeats_captions() {
        let corpus = corpus_of(&["red shirt", "blue dress"]);
        let prompts = generate_prompts(&corpus, 5, 1, &MutationLexicon::default()).unwrap();
        assert_eq!(prompts.len(), 5);
    }

    #[test]
    fn stats_of_three_values() {
        let stats = compare_outputs(Stage::Before, &[1.0, 0.0], &[vec![1.0, 0.0]]).unwrap();
        assert_eq!((stats.mean, stats.std, stats.std_defined), (1.0, 0.0, false));

        let s = UnlearnStats::from_similarities(Stage::After, vec![0.5, 0.6, 0.7]).unwrap();
        assert!((s.mean - 0.6).abs() < 1e-12);
        assert!((s.std - 0.1).abs() < 1e-12);
        assert_eq!((s.min, s.max), (0.5, 0.7));
    }

    #[test]
    fn compare_outputs_errors() {
        assert!(matches!(
            compare_outputs(Stage::Before, &[1.0], &[]),
            Err(Error::EmptyOutputs)
        ));
        assert!(matches!(
            compare_outputs(Stage::Before, &[1.0, 2.0], &[vec![1.0]]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn summary_deltas() {
        let make = |m: f64| UnlearnStats::from_similarities(Stage::Before, vec![m]).unwrap();
        let row = summarize(&make(0.546), &make(0.522));
        assert!((row.delta_mean - 0.024).abs() < 1e-12);
        let row = summarize(&make(0.537), &make(0.488));
        assert!((row.delta_mean - 0.049).abs() < 1e-12);
        assert_eq!(summarize(&make(0.5), &make(0.5)).delta_mean, 0.0);
    }

    #[test]
    fn table_renders_three_decimals() {
        let row = SummaryRow {
            before_mean: 0.546,
            before_std: 0.051,
            before_range: (0.465, 0.606),
            after_mean: 0.522,
            after_std: 0.049,
            after_range: (0.453, 0.586),
            delta_mean: 0.024,
        };
        let table = render_table(&[row]);
        let before = table.lines().nth(1).unwrap();
        assert!(before.contains("Before") && before.contains("0.546") && before.contains("0.465 - 0.606"));
        let after = table.lines().nth(2).unwrap();
        assert!(after.contains("0.522") && after.contains("0.024"));
    }

    #[test]
    fn ssim_identity_and_constants() {
        let img = plane(32, 32, |y, x| ((x * 7 + y * 13) % 17) as f64 / 16.0);
        assert_eq!(compute_ssim(&img, &img).unwrap(), 1.0);

        let black = plane(32, 32, |_, _| 0.0);
        let white = plane(32, 32, |_, _| 1.0);
        let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
        // mu = 0 vs 1, all variances 0: SSIM = c1 / (1 + c1) everywhere.
        let expected = c1 / (1.0 + c1);
        let got = compute_ssim(&black, &white).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(got < 0.05);
    }

    #[test]
    fn ssim_tolerates_faint_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 1.0 / 255.0).unwrap();
        let img = plane(64, 64, |y, x| 0.2 + 0.6 * (((x / 8) + (y / 8)) % 2) as f64);
        let noisy = LumaPlane {
            data: img.data.iter().map(|v| v + noise.sample(&mut rng)).collect(),
            resolution: img.resolution,
        };
        assert!(compute_ssim(&img, &noisy).unwrap() > 0.95);
    }

    #[test]
    fn ssim_rejects_mismatched_sizes_and_handles_tiny_images() {
        let a = plane(8, 8, |y, x| (y + x) as f64 / 16.0);
        let b = plane(8, 9, |_, _| 0.5);
        assert!(matches!(compute_ssim(&a, &b), Err(Error::ResolutionMismatch { .. })));
        assert_eq!(compute_ssim(&a, &a).unwrap(), 1.0);
    }
}
