//! Visual representations used in phase two: raw pixel vectors decoded from
//! image files, and precomputed embeddings read from a sidecar file.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use image::{DynamicImage, ImageReader};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const SIDECAR_FORMAT: &str = "emb-sidecar";
pub const SIDECAR_VERSION: u64 = 1;
/// Reserved sidecar id for the image under attribution.
pub const GENERATED_ID: &str = "generated";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub height: usize,
    pub width: usize,
}

impl Resolution {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl Default for Resolution {
    /// 64x64 analysis resolution.
    fn default() -> Self {
        Self::new(64, 64)
    }
}

/// RGB image as a flat row-major vector of components in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeature {
    pub pixels: Vec<f64>,
    pub resolution: Resolution,
    pub source_id: String,
}

impl RawFeature {
    pub fn new(pixels: Vec<f64>, resolution: Resolution, source_id: impl Into<String>) -> Self {
        debug_assert_eq!(pixels.len(), resolution.pixels() * 3);
        Self {
            pixels,
            resolution,
            source_id: source_id.into(),
        }
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    /// Rec. 601 luma plane.
    pub fn luma(&self) -> LumaPlane {
        let data = self
            .pixels
            .chunks_exact(3)
            .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
            .collect();
        LumaPlane {
            data,
            resolution: self.resolution,
        }
    }

    /// Encodes as an 8-bit RGB PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|&c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let img = image::RgbImage::from_raw(self.resolution.width as u32, self.resolution.height as u32, bytes)
            .expect("pixel buffer matches resolution");
        img.save(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::DecodeError {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
    }
}

/// Single-channel image, values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaPlane {
    pub data: Vec<f64>,
    pub resolution: Resolution,
}

impl LumaPlane {
    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.resolution.width + x]
    }
}

/// Decodes `path`, composites alpha over white, bilinearly resamples to
/// `resolution` and scales to `[0, 1]`.
pub fn load_image_raw(path: &Path, resolution: Resolution) -> Result<RawFeature> {
    let bytes = fs::read(path).map_err(|e| Error::DecodeError {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_image_raw(&bytes, resolution)
        .map_err(|e| match e {
            Error::DecodeError { reason, .. } => Error::DecodeError {
                path: path.to_path_buf(),
                reason,
            },
            Error::UnsupportedFormat(_) => Error::UnsupportedFormat(path.to_path_buf()),
            other => other,
        })
        .map(|f| {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            f.with_source(id)
        })
}

/// [`load_image_raw`] over an in-memory encoded image.
pub fn decode_image_raw(bytes: &[u8], resolution: Resolution) -> Result<RawFeature> {
    let reader = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .expect("cursor reads cannot fail");
    if reader.format().is_none() {
        return Err(Error::UnsupportedFormat(Default::default()));
    }
    let img = reader.decode().map_err(|e| Error::DecodeError {
        path: Default::default(),
        reason: e.to_string(),
    })?;
    Ok(raw_from_image(&img, resolution))
}

fn raw_from_image(img: &DynamicImage, resolution: Resolution) -> RawFeature {
    let rgba = img.to_rgba8();
    let (w, h) = (rgba.width() as usize, rgba.height() as usize);
    let mut planar = Vec::with_capacity(w * h * 3);
    for px in rgba.pixels() {
        let alpha = px[3] as f64 / 255.0;
        for c in 0..3 {
            let v = px[c] as f64 / 255.0;
            planar.push(alpha * v + (1.0 - alpha));
        }
    }
    let pixels = if (h, w) == (resolution.height, resolution.width) {
        planar
    } else {
        resize_bilinear(&planar, Resolution::new(h, w), resolution)
    };
    RawFeature::new(pixels, resolution, "")
}

/// Bilinear resampling of an interleaved RGB buffer with half-pixel centres.
fn resize_bilinear(src: &[f64], from: Resolution, to: Resolution) -> Vec<f64> {
    let mut out = Vec::with_capacity(to.pixels() * 3);
    let scale_y = from.height as f64 / to.height as f64;
    let scale_x = from.width as f64 / to.width as f64;
    let sample = |y: usize, x: usize, c: usize| src[(y * from.width + x) * 3 + c];
    for oy in 0..to.height {
        let fy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (from.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(from.height - 1);
        let ty = fy - y0 as f64;
        for ox in 0..to.width {
            let fx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (from.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(from.width - 1);
            let tx = fx - x0 as f64;
            for c in 0..3 {
                let top = sample(y0, x0, c) * (1.0 - tx) + sample(y0, x1, c) * tx;
                let bottom = sample(y1, x0, c) * (1.0 - tx) + sample(y1, x1, c) * tx;
                out.push((top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// Supplies raw features for training samples by id.
pub trait ImageSource {
    fn raw_feature(&self, id: &str) -> Result<Arc<RawFeature>>;
}

/// Loads corpus images from disk on first use and keeps them in memory.
#[derive(Debug)]
pub struct DiskImages {
    paths: HashMap<String, PathBuf>,
    resolution: Resolution,
    cache: Mutex<HashMap<String, Arc<RawFeature>>>,
}

impl DiskImages {
    pub fn new(corpus: &Corpus, resolution: Resolution) -> Self {
        let paths = corpus
            .samples()
            .iter()
            .map(|s| (s.id.clone(), corpus.image_path(s)))
            .collect();
        Self {
            paths,
            resolution,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl ImageSource for DiskImages {
    fn raw_feature(&self, id: &str) -> Result<Arc<RawFeature>> {
        if let Some(hit) = self.cache.lock().expect("image cache poisoned").get(id) {
            return Ok(Arc::clone(hit));
        }
        let path = self.paths.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
        let feature = Arc::new(load_image_raw(path, self.resolution)?.with_source(id));
        self.cache
            .lock()
            .expect("image cache poisoned")
            .insert(id.to_string(), Arc::clone(&feature));
        Ok(feature)
    }
}

/// Raw features already held in memory.
#[derive(Debug, Clone, Default)]
pub struct MemoryImages {
    features: HashMap<String, Arc<RawFeature>>,
}

impl MemoryImages {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, feature: RawFeature) {
        self.features.insert(id.into(), Arc::new(feature));
    }
}

impl FromIterator<(String, RawFeature)> for MemoryImages {
    fn from_iter<T: IntoIterator<Item = (String, RawFeature)>>(iter: T) -> Self {
        Self {
            features: iter.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
        }
    }
}

impl ImageSource for MemoryImages {
    fn raw_feature(&self, id: &str) -> Result<Arc<RawFeature>> {
        self.features
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }
}

/// `a . b / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SidecarHeader {
    format: String,
    version: u64,
    dim: usize,
    model_tag: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarRow {
    id: String,
    vec: Vec<f64>,
}

#[derive(Deserialize)]
struct LooseRow {
    id: String,
    vec: Vec<Option<f64>>,
}

/// Embedding vectors keyed by sample id, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    model_tag: String,
    vectors: HashMap<String, Vec<f64>>,
    order: Vec<String>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, model_tag: impl Into<String>) -> Self {
        Self {
            dim,
            model_tag: model_tag.into(),
            vectors: HashMap::new(),
            order: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    /// Ids in insertion (file) order.
    pub fn ids(&self) -> &[String] {
        &self.order
    }

    /// Adds a validated vector.
    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        validate_vector(&id, &vector, self.dim)?;
        if self.vectors.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.order.push(id.clone());
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", sidecar_header(self.dim, &self.model_tag)).map_err(|e| Error::io(path, e))?;
        for id in &self.order {
            writeln!(out, "{}", sidecar_row(id, &self.vectors[id])).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Header line of an embedding sidecar.
pub fn sidecar_header(dim: usize, model_tag: &str) -> String {
    serde_json::to_string(&SidecarHeader {
        format: SIDECAR_FORMAT.into(),
        version: SIDECAR_VERSION,
        dim,
        model_tag: model_tag.into(),
    })
    .expect("header serializes")
}

/// One data line of an embedding sidecar.
pub fn sidecar_row(id: &str, vector: &[f64]) -> String {
    serde_json::to_string(&SidecarRow {
        id: id.into(),
        vec: vector.to_vec(),
    })
    .expect("row serializes")
}

fn validate_vector(id: &str, vector: &[f64], dim: usize) -> Result<()> {
    if vector.len() != dim {
        return Err(Error::DimMismatch {
            id: id.into(),
            expected: dim,
            got: vector.len(),
        });
    }
    if vector.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteVector(id.into()));
    }
    if vector.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroEmbedding(id.into()));
    }
    Ok(())
}

/// Loads and validates an embedding sidecar.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let text = fs::read_to_string(path).map_err(|e| Error::MalformedInput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_embeddings(&text)
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingStore> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::MissingHeader("empty sidecar".into()))?;
    let header: SidecarHeader = serde_json::from_str(header_line).map_err(|e| Error::MissingHeader(e.to_string()))?;
    if header.format != SIDECAR_FORMAT {
        return Err(Error::MissingHeader(format!(
            "format {:?} is not {SIDECAR_FORMAT:?}",
            header.format
        )));
    }
    if header.version != SIDECAR_VERSION {
        return Err(Error::VersionMismatch {
            found: header.version,
            expected: SIDECAR_VERSION,
        });
    }
    if header.dim == 0 {
        return Err(Error::MissingHeader("dim must be positive".into()));
    }

    let mut store = EmbeddingStore::new(header.dim, header.model_tag);
    for (idx, line) in lines {
        let row = parse_row(line).map_err(|reason| Error::MalformedRecord { line: idx + 1, reason })??;
        store.insert(row.id, row.vec)?;
    }
    Ok(store)
}

/// Outer error: unparseable line. Inner error: a parsed row with non-finite
/// components (JSON has no NaN, but common writers emit `NaN`/`Infinity`).
fn parse_row(line: &str) -> std::result::Result<Result<SidecarRow>, String> {
    match serde_json::from_str::<SidecarRow>(line) {
        Ok(row) => Ok(Ok(row)),
        Err(strict) => {
            let patched = line
                .replace("-Infinity", "null")
                .replace("Infinity", "null")
                .replace("NaN", "null");
            match serde_json::from_str::<LooseRow>(&patched) {
                Ok(loose) if loose.vec.iter().any(Option::is_none) => Ok(Err(Error::NonFiniteVector(loose.id))),
                _ => Err(strict.to_string()),
            }
        }
    }
}
