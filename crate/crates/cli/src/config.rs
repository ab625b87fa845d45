//! Run configuration: TOML file values overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use datatrace_core::influence::InfluenceConfig;
use datatrace_core::retrieval::{Cutoff, DEFAULT_CUTOFF_FRACTION};
use datatrace_core::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Fixture,
    Live,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with defaults for any of these flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Training manifest (JSON lines).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Saved TF-IDF index.
    #[arg(long, global = true)]
    pub index: Option<PathBuf>,
    /// Embedding sidecar for the training images.
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Retrieve the top fraction of the corpus.
    #[arg(long, global = true, conflicts_with = "top_k")]
    pub cutoff_fraction: Option<f64>,
    /// Retrieve a fixed number of candidates instead of a fraction.
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Fraction of candidates reported as influential.
    #[arg(long, global = true)]
    pub top_fraction: Option<f64>,
    /// Weight of the raw-pixel cosine in the combined score.
    #[arg(long, global = true)]
    pub combine_weight: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub cutoff_fraction: Option<f64>,
    pub top_k: Option<usize>,
    pub top_fraction: Option<f64>,
    pub combine_weight: Option<f64>,
    pub seed: Option<u64>,
    pub provider: Option<ProviderKind>,
    pub fixture_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub endpoint: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::MalformedInput {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

/// Merged configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    cutoff_fraction: Option<f64>,
    top_k: Option<usize>,
    pub top_fraction: f64,
    pub combine_weight: f64,
    pub seed: u64,
    pub provider: ProviderKind,
    pub fixture_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub endpoint: Option<String>,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Ok(Self::merge(args, file))
    }

    pub fn merge(args: &CommonArgs, file: FileConfig) -> Self {
        // A cutoff given on the command line replaces both file cutoff keys.
        let flag_cutoff = args.cutoff_fraction.is_some() || args.top_k.is_some();
        let (cutoff_fraction, top_k) = if flag_cutoff {
            (args.cutoff_fraction, args.top_k)
        } else {
            (file.cutoff_fraction, file.top_k)
        };
        Self {
            manifest: args.manifest.clone().or(file.manifest),
            index: args.index.clone().or(file.index),
            embeddings: args.embeddings.clone().or(file.embeddings),
            out_dir: args.out_dir.clone().or(file.out_dir),
            cutoff_fraction,
            top_k,
            top_fraction: args
                .top_fraction
                .or(file.top_fraction)
                .unwrap_or(datatrace_core::influence::DEFAULT_TOP_FRACTION),
            combine_weight: args
                .combine_weight
                .or(file.combine_weight)
                .unwrap_or(datatrace_core::influence::DEFAULT_COMBINE_WEIGHT),
            seed: args.seed.or(file.seed).unwrap_or(0),
            provider: args.provider.or(file.provider).unwrap_or(ProviderKind::Fixture),
            fixture_dir: file.fixture_dir,
            cache_dir: file.cache_dir,
            endpoint: file.endpoint,
        }
    }

    /// The configured cutoff, or `default` when none was given.
    pub fn cutoff_or(&self, default: Cutoff) -> Result<Cutoff> {
        match (self.top_k, self.cutoff_fraction) {
            (Some(_), Some(_)) => Err(Error::InvalidConfig(
                "set either top_k or cutoff_fraction, not both".into(),
            )),
            (Some(k), None) => Ok(Cutoff::TopK(k)),
            (None, Some(f)) => Ok(Cutoff::TopFraction(f)),
            (None, None) => Ok(default),
        }
    }

    pub fn influence(&self, default_cutoff: Cutoff) -> Result<InfluenceConfig> {
        let config = InfluenceConfig {
            cutoff: self.cutoff_or(default_cutoff)?,
            combine_weight: self.combine_weight,
            top_fraction: self.top_fraction,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig(format!("--{flag} is required")))
    }
}

pub fn default_cutoff() -> Cutoff {
    Cutoff::TopFraction(DEFAULT_CUTOFF_FRACTION)
}
