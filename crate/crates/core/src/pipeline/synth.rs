//! Seeded synthetic speckle images.
//!
//! Two independent white Gaussian fields are low-pass filtered with an
//! (optionally anisotropic, rotated) Gaussian kernel and combined as
//! `I = a² + b²`, which gives the exponential intensity statistics of fully
//! developed speckle. The result is rescaled to the requested mean and
//! quantized to 8 bits. This is a texture stand-in for captured data, not an
//! optical simulation.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{preprocess, RawImage, Split};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::mix_seed;
use crate::taxonomy::Taxonomy;
use crate::tensor::Element;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleParams {
    /// Gaussian smoothing width along the minor axis, in pixels.
    pub correlation_length: f64,
    /// Major/minor width ratio, at least 1.
    pub anisotropy: f64,
    /// Angle of the major axis from the x axis, radians.
    pub orientation: f64,
    /// Target mean intensity as a fraction of full scale.
    pub mean_intensity: f64,
    pub seed: u64,
}

impl Default for SpeckleParams {
    fn default() -> Self {
        Self {
            correlation_length: 2.0,
            anisotropy: 1.0,
            orientation: 0.0,
            mean_intensity: 0.25,
            seed: 42,
        }
    }
}

impl SpeckleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.correlation_length > 0.0 && self.correlation_length.is_finite()) {
            return Err(Error::InvalidConfig("correlation_length must be positive".into()));
        }
        if !(self.anisotropy >= 1.0 && self.anisotropy.is_finite()) {
            return Err(Error::InvalidConfig("anisotropy must be >= 1".into()));
        }
        if !self.orientation.is_finite() {
            return Err(Error::InvalidConfig("orientation must be finite".into()));
        }
        if !(self.mean_intensity > 0.0 && self.mean_intensity <= 1.0) {
            return Err(Error::InvalidConfig("mean_intensity must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

fn white_noise(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Valid-mode separable smoothing of a `(h + 2ry) × (w + 2rx)` field.
fn smooth_separable(field: &[f64], h: usize, w: usize, tx: &[f64], ty: &[f64]) -> Vec<f64> {
    let (rx, ry) = (tx.len() / 2, ty.len() / 2);
    let fw = w + 2 * rx;
    let fh = h + 2 * ry;
    let mut rows = vec![0.0; fh * w];
    for y in 0..fh {
        let src = &field[y * fw..][..fw];
        for x in 0..w {
            rows[y * w + x] = tx.iter().zip(&src[x..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for (k, &t) in ty.iter().enumerate() {
        for y in 0..h {
            let src = &rows[(y + k) * w..][..w];
            out[y * w..][..w].iter_mut().zip(src).for_each(|(o, &v)| *o += t * v);
        }
    }
    out
}

/// Valid-mode smoothing with a full 2-D kernel of side `2r + 1`.
fn smooth_full(field: &[f64], h: usize, w: usize, kernel: &[f64], r: usize) -> Vec<f64> {
    let side = 2 * r + 1;
    let fw = w + 2 * r;
    let mut out = vec![0.0; h * w];
    for ky in 0..side {
        for kx in 0..side {
            let k = kernel[ky * side + kx];
            if k == 0.0 {
                continue;
            }
            for y in 0..h {
                let src = &field[(y + ky) * fw + kx..][..w];
                out[y * w..][..w].iter_mut().zip(src).for_each(|(o, &v)| *o += k * v);
            }
        }
    }
    out
}

struct Smoother {
    radius_x: usize,
    radius_y: usize,
    kind: SmootherKind,
}

enum SmootherKind {
    Separable { tx: Vec<f64>, ty: Vec<f64> },
    Full(Vec<f64>),
}

impl Smoother {
    fn new(p: &SpeckleParams) -> Self {
        let minor = p.correlation_length;
        let major = minor * p.anisotropy;
        let (s, c) = p.orientation.sin_cos();
        const ALIGNED: f64 = 1e-12;
        let axis_sigmas = if p.anisotropy == 1.0 || s.abs() < ALIGNED {
            Some((major, minor))
        } else if c.abs() < ALIGNED {
            Some((minor, major))
        } else {
            None
        };
        match axis_sigmas {
            Some((sx, sy)) => {
                let (rx, ry) = ((3.0 * sx).ceil() as usize, (3.0 * sy).ceil() as usize);
                Self {
                    radius_x: rx,
                    radius_y: ry,
                    kind: SmootherKind::Separable {
                        tx: gaussian_taps(sx, rx),
                        ty: gaussian_taps(sy, ry),
                    },
                }
            }
            None => {
                let r = (3.0 * major).ceil() as usize;
                let side = 2 * r + 1;
                let mut k = Vec::with_capacity(side * side);
                for dy in -(r as isize)..=r as isize {
                    for dx in -(r as isize)..=r as isize {
                        let (dx, dy) = (dx as f64, dy as f64);
                        let u = dx * c + dy * s;
                        let v = -dx * s + dy * c;
                        k.push((-(u * u) / (2.0 * major * major) - (v * v) / (2.0 * minor * minor)).exp());
                    }
                }
                let total: f64 = k.iter().sum();
                k.iter_mut().for_each(|v| *v /= total);
                Self {
                    radius_x: r,
                    radius_y: r,
                    kind: SmootherKind::Full(k),
                }
            }
        }
    }

    fn field_len(&self, h: usize, w: usize) -> usize {
        (h + 2 * self.radius_y) * (w + 2 * self.radius_x)
    }

    fn apply(&self, field: &[f64], h: usize, w: usize) -> Vec<f64> {
        match &self.kind {
            SmootherKind::Separable { tx, ty } => smooth_separable(field, h, w, tx, ty),
            SmootherKind::Full(k) => smooth_full(field, h, w, k, self.radius_x),
        }
    }
}

/// One `h × w` grayscale speckle image. Deterministic in `params.seed`.
pub fn synth_speckle(params: &SpeckleParams, h: usize, w: usize) -> Result<RawImage> {
    params.validate()?;
    if h == 0 || w == 0 {
        return Err(Error::InvalidShape(format!("speckle image {h}x{w}")));
    }
    let smoother = Smoother::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = smoother.field_len(h, w);
    let a = smoother.apply(&white_noise(&mut rng, n), h, w);
    let b = smoother.apply(&white_noise(&mut rng, n), h, w);
    let intensity: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * x + y * y).collect();
    let mean = intensity.iter().sum::<f64>() / intensity.len() as f64;
    let scale = params.mean_intensity * 255.0 / mean;
    let data = intensity
        .iter()
        .map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    RawImage::new(w, h, 1, data)
}

/// A synthetic class: a taxonomy class paired with the texture used for it.
/// The `seed` inside `params` is replaced per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub name: String,
    pub class_id: usize,
    pub params: SpeckleParams,
}

/// Picks `count` taxonomy classes spread evenly over the id range and gives
/// each a distinct texture: correlation lengths step by √2 from 1 px, and
/// beyond eight classes the anisotropy steps up as well.
pub fn default_synth_classes(taxonomy: &Taxonomy, count: usize) -> Result<Vec<SynthClass>> {
    let n = taxonomy.len();
    if count == 0 || count > n {
        return Err(Error::InvalidConfig(format!(
            "synthetic class count must be in 1..={n}"
        )));
    }
    Ok((0..count)
        .map(|i| {
            let id = i * n / count;
            let rung = (i % 8) as f64;
            SynthClass {
                name: taxonomy.classes()[id].name.clone(),
                class_id: id,
                params: SpeckleParams {
                    correlation_length: 2f64.powf(rung / 2.0),
                    anisotropy: 1.0 + 0.75 * (i / 8) as f64,
                    orientation: 0.0,
                    mean_intensity: 0.25,
                    seed: 0,
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: Vec<SynthClass>,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    /// Generated images are square with this side.
    pub resolution: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ImageRecord {
    path: String,
    split: Split,
    class: String,
    class_id: usize,
    params: SpeckleParams,
}

impl SynthConfig {
    fn records(&self) -> Vec<ImageRecord> {
        let mut out = Vec::new();
        for (ci, class) in self.classes.iter().enumerate() {
            let splits = [
                (Split::Train, self.train_per_class),
                (Split::Val, self.val_per_class),
                (Split::Test, self.test_per_class),
            ];
            for (split, count) in splits {
                for j in 0..count {
                    let seed = mix_seed(&[self.seed, ci as u64, split as u64, j as u64]);
                    out.push(ImageRecord {
                        path: format!("{}/{}_{j:04}.pgm", class.name, split.name()),
                        split,
                        class: class.name.clone(),
                        class_id: class.class_id,
                        params: SpeckleParams { seed, ..class.params },
                    });
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidConfig("no synthetic classes".into()));
        }
        if self.resolution < crate::model::MIN_INPUT_SIDE {
            return Err(Error::InvalidConfig(format!(
                "resolution {} too small",
                self.resolution
            )));
        }
        self.classes.iter().try_for_each(|c| c.params.validate())
    }
}

/// In-memory train/validation/test splits, preprocessed for the model.
#[derive(Debug, Clone)]
pub struct SyntheticSplits<T> {
    pub train: Dataset<T>,
    pub val: Dataset<T>,
    pub test: Dataset<T>,
}

/// Generates every image of `config` without touching the filesystem. The
/// pixels are identical to those written by [`write_synthetic_dataset`].
pub fn generate_synthetic<T: Element>(config: &SynthConfig) -> Result<SyntheticSplits<T>> {
    config.validate()?;
    let side = config.resolution;
    let records = config.records();
    let images: Vec<_> = records
        .par_iter()
        .map(|r| {
            let raw = synth_speckle(&r.params, side, side)?;
            Ok((r.split, preprocess::<T>(&raw, side, side)?, r.class_id))
        })
        .collect::<Result<_>>()?;
    let mut splits = SyntheticSplits {
        train: Dataset::default(),
        val: Dataset::default(),
        test: Dataset::default(),
    };
    for (split, image, label) in images {
        match split {
            Split::Train => splits.train.push(image, label),
            Split::Val => splits.val.push(image, label),
            Split::Test => splits.test.push(image, label),
        }
    }
    Ok(splits)
}

/// Writes `root/<class>/<split>_NNNN.pgm`, the `train.tsv`, `val.tsv` and
/// `test.tsv` manifests, and `params.json` listing every image's parameters.
pub fn write_synthetic_dataset(root: impl AsRef<Path>, config: &SynthConfig) -> Result<()> {
    config.validate()?;
    let root = root.as_ref();
    let side = config.resolution;
    for class in &config.classes {
        let dir = root.join(&class.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let records = config.records();
    records
        .par_iter()
        .try_for_each(|r| synth_speckle(&r.params, side, side)?.save(root.join(&r.path)))?;

    for split in [Split::Train, Split::Val, Split::Test] {
        let mut text = String::new();
        for r in records.iter().filter(|r| r.split == split) {
            text.push_str(&format!("{}\t{}\n", r.path, r.class));
        }
        let path = root.join(format!("{}.tsv", split.name()));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }

    let doc = serde_json::json!({
        "resolution": config.resolution,
        "seed": config.seed,
        "classes": config.classes,
        "images": records,
    });
    let path = root.join("params.json");
    let body = serde_json::to_string_pretty(&doc)?;
    fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))
}
