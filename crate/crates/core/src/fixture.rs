//! Procedural fixture corpus: coloured shapes with templated captions.
//!
//! Everything is derived from a seed, so the corpus is regenerated on demand
//! instead of being committed as binaries. [`write_fixture`] lays out
//!
//! ```text
//! <dir>/images/<id>.png
//! <dir>/manifest.jsonl
//! <dir>/embeddings.jsonl      (PooledColorEmbedder sidecar)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, TrainingSample};
use crate::error::{Error, Result};
use crate::image_features::{EmbeddingStore, MemoryImages, RawFeature, Resolution};
use crate::toy_generator::{Embedder, PooledColorEmbedder};

pub const DEFAULT_FIXTURE_SIZE: usize = 500;

const COLORS: [(&str, [f64; 3]); 10] = [
    ("red", [0.85, 0.10, 0.10]),
    ("blue", [0.10, 0.20, 0.85]),
    ("green", [0.10, 0.65, 0.15]),
    ("yellow", [0.95, 0.85, 0.10]),
    ("purple", [0.55, 0.15, 0.70]),
    ("orange", [0.95, 0.50, 0.05]),
    ("pink", [0.95, 0.45, 0.70]),
    ("brown", [0.50, 0.30, 0.10]),
    ("black", [0.05, 0.05, 0.05]),
    ("teal", [0.05, 0.55, 0.55]),
];
const BACKGROUNDS: [(&str, [f64; 3]); 4] = [
    ("white", [0.97, 0.97, 0.97]),
    ("beige", [0.93, 0.87, 0.74]),
    ("grey", [0.70, 0.70, 0.70]),
    ("lavender", [0.82, 0.78, 0.95]),
];
const SHAPES: [&str; 6] = ["circle", "square", "triangle", "diamond", "cross", "ring"];
const SIZES: [(&str, f64); 3] = [("small", 0.14), ("medium", 0.22), ("large", 0.30)];
const ROWS: [(&str, f64); 3] = [("top", 0.27), ("middle", 0.5), ("bottom", 0.73)];
const COLS: [(&str, f64); 3] = [("left", 0.27), ("center", 0.5), ("right", 0.73)];
const BRANDS: [&str; 6] = ["acme", "globex", "initech", "hooli", "umbra", "vandelay"];
/// Side of the texture grid laid over every image.
pub const TEXTURE_GRID: usize = 8;
/// Texture offsets are uniform in `[-TEXTURE_AMPLITUDE, TEXTURE_AMPLITUDE)`.
pub const TEXTURE_AMPLITUDE: f64 = 0.35;

/// Parameters of one fixture image.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub color: usize,
    pub background: usize,
    pub shape: usize,
    pub size: usize,
    pub row: usize,
    pub col: usize,
    pub brand: usize,
    /// Offset of the shape centre, as a fraction of the image side.
    pub jitter: (f64, f64),
    /// Per-cell RGB offsets on a `TEXTURE_GRID` square grid, row-major.
    /// Flat shapes on flat backgrounds look too much alike for blends to be
    /// attributable; the texture makes every sample visually distinct, as
    /// real photographs are.
    pub texture: Vec<[f64; 3]>,
}

impl ShapeSpec {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Self {
            color: rng.random_range(0..COLORS.len()),
            background: rng.random_range(0..BACKGROUNDS.len()),
            shape: rng.random_range(0..SHAPES.len()),
            size: rng.random_range(0..SIZES.len()),
            row: rng.random_range(0..ROWS.len()),
            col: rng.random_range(0..COLS.len()),
            brand: rng.random_range(0..BRANDS.len()),
            jitter: (rng.random_range(-0.06..0.06), rng.random_range(-0.06..0.06)),
            texture: (0..TEXTURE_GRID * TEXTURE_GRID)
                .map(|_| {
                    let mut cell = [0.0; 3];
                    for v in &mut cell {
                        *v = rng.random_range(-TEXTURE_AMPLITUDE..TEXTURE_AMPLITUDE);
                    }
                    cell
                })
                .collect(),
        }
    }

    pub fn caption(&self) -> String {
        format!(
            "{} {} {} at {} {} on {} background by {}",
            SIZES[self.size].0,
            COLORS[self.color].0,
            SHAPES[self.shape],
            ROWS[self.row].0,
            COLS[self.col].0,
            BACKGROUNDS[self.background].0,
            BRANDS[self.brand]
        )
    }

    fn inside(&self, u: f64, v: f64) -> bool {
        let cy = ROWS[self.row].1 + self.jitter.0;
        let cx = COLS[self.col].1 + self.jitter.1;
        let r = SIZES[self.size].1 / 2.0 * 1.6;
        let (dy, dx) = (v - cy, u - cx);
        match SHAPES[self.shape] {
            "circle" => dx * dx + dy * dy <= r * r,
            "square" => dx.abs() <= r * 0.85 && dy.abs() <= r * 0.85,
            "triangle" => dy <= r * 0.8 && dy >= -r && dx.abs() <= (dy + r) * 0.6,
            "diamond" => dx.abs() + dy.abs() <= r,
            "cross" => (dx.abs() <= r * 0.3 && dy.abs() <= r) || (dy.abs() <= r * 0.3 && dx.abs() <= r),
            "ring" => {
                let d2 = dx * dx + dy * dy;
                d2 <= r * r && d2 >= (r * 0.55).powi(2)
            }
            _ => unreachable!("shape table is closed"),
        }
    }

    /// Renders at `resolution`, quantised to 8 bits like a decoded PNG.
    pub fn render(&self, resolution: Resolution) -> RawFeature {
        let Resolution { height, width } = resolution;
        let fg = COLORS[self.color].1;
        let bg = BACKGROUNDS[self.background].1;
        let mut pixels = Vec::with_capacity(resolution.pixels() * 3);
        for y in 0..height {
            let v = (y as f64 + 0.5) / height as f64;
            let ty = y * TEXTURE_GRID / height;
            for x in 0..width {
                let u = (x as f64 + 0.5) / width as f64;
                let base = if self.inside(u, v) { fg } else { bg };
                let offset = self.texture[ty * TEXTURE_GRID + x * TEXTURE_GRID / width];
                for c in 0..3 {
                    let value = (base[c] + offset[c]).clamp(0.0, 1.0);
                    pixels.push((value * 255.0).round() / 255.0);
                }
            }
        }
        RawFeature::new(pixels, resolution, "")
    }
}

/// An in-memory fixture: corpus, decoded images and embeddings.
pub struct FixtureCorpus {
    pub corpus: Corpus,
    pub images: MemoryImages,
    pub store: EmbeddingStore,
    pub embedder: PooledColorEmbedder,
}

/// Builds `count` samples with ids `s0000`, `s0001`, ... from `seed`.
pub fn build_fixture(count: usize, seed: u64, resolution: Resolution, root: &Path) -> Result<FixtureCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embedder = PooledColorEmbedder::default();
    let mut store = EmbeddingStore::new(embedder.dim(), embedder.model_tag());
    let mut images = MemoryImages::new();
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let spec = ShapeSpec::random(&mut rng);
        let id = format!("s{i:04}");
        let image = spec.render(resolution).with_source(&id);
        store.insert(&id, embedder.embed(&image))?;
        images.insert(&id, image);
        samples.push(TrainingSample {
            id: id.clone(),
            caption: spec.caption(),
            image_path: PathBuf::from("images").join(format!("{id}.png")),
        });
    }
    Ok(FixtureCorpus {
        corpus: Corpus::new(samples, root)?,
        images,
        store,
        embedder,
    })
}

/// Paths of a fixture written to disk.
#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
}

impl FixturePaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            manifest: dir.join("manifest.jsonl"),
            embeddings: dir.join("embeddings.jsonl"),
        }
    }
}

/// Writes the fixture to `dir` (images, manifest and sidecar).
pub fn write_fixture(dir: &Path, count: usize, seed: u64, resolution: Resolution) -> Result<FixturePaths> {
    let fixture = build_fixture(count, seed, resolution, dir)?;
    let paths = FixturePaths::in_dir(dir);
    let image_dir = dir.join("images");
    fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
    for sample in fixture.corpus.samples() {
        let image = crate::image_features::ImageSource::raw_feature(&fixture.images, &sample.id)?;
        image.save_png(&fixture.corpus.image_path(sample))?;
    }
    fixture.corpus.write_manifest(&paths.manifest)?;
    fixture.store.write_sidecar(&paths.embeddings)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_features::{load_image_raw, ImageSource};

    #[test]
    fn fixture_is_deterministic() {
        let a = build_fixture(20, 9, Resolution::default(), Path::new(".")).unwrap();
        let b = build_fixture(20, 9, Resolution::default(), Path::new(".")).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.store, b.store);
        assert_eq!(
            a.images.raw_feature("s0007").unwrap(),
            b.images.raw_feature("s0007").unwrap()
        );
    }

    #[test]
    fn written_pngs_decode_to_the_in_memory_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_fixture(dir.path(), 5, 1, Resolution::default()).unwrap();
        let fixture = build_fixture(5, 1, Resolution::default(), dir.path()).unwrap();
        let loaded = crate::corpus::load_manifest(&paths.manifest).unwrap();
        assert_eq!(loaded.len(), 5);
        for sample in loaded.samples() {
            let from_disk = load_image_raw(&loaded.image_path(sample), Resolution::default()).unwrap();
            let in_memory = fixture.images.raw_feature(&sample.id).unwrap();
            assert_eq!(from_disk.pixels, in_memory.pixels);
        }
        let store = crate::image_features::load_embeddings(&paths.embeddings).unwrap();
        assert_eq!(store, fixture.store);
    }

    #[test]
    fn captions_follow_template() {
        let spec = ShapeSpec {
            color: 0,
            background: 1,
            shape: 2,
            size: 0,
            row: 2,
            col: 0,
            brand: 3,
            jitter: (0.0, 0.0),
            texture: vec![[0.0; 3]; TEXTURE_GRID * TEXTURE_GRID],
        };
        assert_eq!(
            spec.caption(),
            "small red triangle at bottom left on beige background by hooli"
        );
    }
}
