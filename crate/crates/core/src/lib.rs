//! Search-based influence tracing for generative image models.
//!
//! A prompt is matched against the training captions with TF-IDF, and the
//! generated image is then compared with the images of the retrieved samples.
//! Each candidate gets a normalised kernel weight that serves as its share of
//! the influence on the output.
//!
//! ```
//! use datatrace_core::{build_index, retrieve, Corpus, Cutoff, TrainingSample};
//!
//! let samples = ["red dress by acme", "blue shirt", "red shoes"]
//!     .iter()
//!     .enumerate()
//!     .map(|(i, c)| TrainingSample {
//!         id: format!("d{i}"),
//!         caption: c.to_string(),
//!         image_path: format!("d{i}.png").into(),
//!     })
//!     .collect();
//! let corpus = Corpus::new(samples, ".").unwrap();
//! let index = build_index(&corpus).unwrap();
//! let hits = retrieve(&index, "red dress", Cutoff::TopK(2)).unwrap();
//! assert_eq!(hits.candidates[0].id, "d0");
//! ```

pub mod corpus;
pub mod error;
pub mod fixture;
pub mod image_features;
pub mod influence;
pub mod lexicon;
pub mod retrieval;
pub mod text_index;
pub mod toy_generator;
pub mod unlearn_eval;
pub mod websearch;

pub use corpus::{load_manifest, validate_corpus, Corpus, TrainingSample};
pub use error::{Error, ErrorClass, Result};
pub use image_features::{
    cosine, load_embeddings, load_image_raw, EmbeddingStore, ImageSource, RawFeature, Resolution,
};
pub use influence::{data_influence, top_influential, GeneratedImage, InfluenceConfig, InfluenceReport};
pub use retrieval::{retrieve, Cutoff, RetrievalResult};
pub use text_index::{build_index, load_index, save_index, tokenize, TfIdfIndex};
pub use toy_generator::{closed_loop_trial, generate, Embedder, GeneratorConfig, PooledColorEmbedder};
pub use unlearn_eval::{compare_outputs, compute_ssim, Stage, UnlearnStats};

// The guide's code listings compile and run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/tfidf.md")]
    mod tfidf {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/influence.md")]
    mod influence {}
    #[doc = include_str!("../../../book/src/unlearning.md")]
    mod unlearning {}
    #[doc = include_str!("../../../book/src/toy_loop.md")]
    mod toy_loop {}
    #[doc = include_str!("../../../book/src/websearch.md")]
    mod websearch {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
