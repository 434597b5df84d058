//! Per-pixel ink segmentation from topography.
//!
//! The baseline learner is a logistic classifier over a multiscale feature
//! stack (smoothed height, gradient magnitude, residual roughness and
//! Laplacian at several Gaussian scales), trained with a soft-Dice plus
//! cross-entropy objective using Adam.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmap_io::LabelMask;
use crate::preprocess::NormalizedImage;

pub const DEFAULT_SCALES_PX: [usize; 5] = [1, 2, 4, 8, 16];
pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DICE_SMOOTH: f64 = 1.0;
/// Features per scale: smoothed height, gradient magnitude, roughness,
/// Laplacian.
pub const FEATURES_PER_SCALE: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub scales_px: Vec<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            scales_px: DEFAULT_SCALES_PX.to_vec(),
        }
    }
}

impl FeatureConfig {
    pub fn feature_count(&self) -> usize {
        1 + FEATURES_PER_SCALE * self.scales_px.len()
    }

    /// Width of the 3-sigma truncated Gaussian kernel for a scale.
    pub fn kernel_support(sigma_px: usize) -> usize {
        2 * 3 * sigma_px + 1
    }

    pub fn max_support(&self) -> usize {
        self.scales_px
            .iter()
            .map(|&s| Self::kernel_support(s))
            .max()
            .unwrap_or(1)
    }

    /// The subset of scales whose kernels fit inside a `width x height`
    /// image, or `None` when not even the smallest fits.
    pub fn fitting(&self, width: usize, height: usize) -> Option<FeatureConfig> {
        let limit = width.min(height);
        let scales: Vec<usize> = self
            .scales_px
            .iter()
            .copied()
            .filter(|&s| Self::kernel_support(s) <= limit)
            .collect();
        (!scales.is_empty()).then_some(FeatureConfig { scales_px: scales })
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = vec!["height".to_string()];
        for s in &self.scales_px {
            for kind in ["smooth", "grad", "rough", "lap"] {
                names.push(format!("{kind}_s{s}"));
            }
        }
        names
    }
}

/// Feature planes in row-major pixel order, one plane per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub width: usize,
    pub height: usize,
    pub config: FeatureConfig,
    pub planes: Vec<Vec<f64>>,
}

impl FeatureStack {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, idx: usize) -> Vec<f64> {
        self.planes.iter().map(|p| p[idx]).collect()
    }
}

/// Normalized Gaussian taps truncated at `ceil(3 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let s = sigma;
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-0.5 * x * x / (s * s)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn transpose(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    const TILE: usize = 32;
    for r0 in (0..height).step_by(TILE) {
        for c0 in (0..width).step_by(TILE) {
            for r in r0..(r0 + TILE).min(height) {
                for c in c0..(c0 + TILE).min(width) {
                    out[c * height + r] = src[r * width + c];
                }
            }
        }
    }
    out
}

/// Convolution along columns with edge clamping, written as
/// `x + sum w_k (x_k - x)` with symmetric taps folded pairwise so that
/// constant regions stay exactly constant.
fn blur_columns(src: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = kernel.len() / 2;
    let side = &kernel[radius + 1..];
    let mut out = vec![0.0; src.len()];
    let clamp_row = |r: isize| r.clamp(0, height as isize - 1) as usize;
    for r in 0..height {
        let centre = &src[r * width..(r + 1) * width];
        let acc = &mut out[r * width..(r + 1) * width];
        for (k, w) in side.iter().enumerate() {
            let up = clamp_row(r as isize - k as isize - 1);
            let dn = clamp_row(r as isize + k as isize + 1);
            let a = &src[up * width..(up + 1) * width];
            let b = &src[dn * width..(dn + 1) * width];
            for (((s, x), y), c) in acc.iter_mut().zip(a).zip(b).zip(centre) {
                *s += w * ((x - c) + (y - c));
            }
        }
        for (o, c) in acc.iter_mut().zip(centre) {
            *o += c;
        }
    }
    out
}

/// Separable Gaussian-style convolution with edge clamping.
pub(crate) fn blur(src: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let v = blur_columns(src, width, height, kernel);
    let t = transpose(&v, width, height);
    let h = blur_columns(&t, height, width, kernel);
    transpose(&h, height, width)
}

pub fn extract_features(img: &NormalizedImage) -> Result<FeatureStack> {
    extract_features_with(img, &FeatureConfig::default())
}

pub fn extract_features_with(img: &NormalizedImage, config: &FeatureConfig) -> Result<FeatureStack> {
    let (w, h) = (img.width, img.height);
    if config.scales_px.is_empty() || config.scales_px.contains(&0) {
        return Err(Error::InvalidInput(format!(
            "feature scales must be positive, got {:?}",
            config.scales_px
        )));
    }
    let support = config.max_support();
    if w < support || h < support {
        return Err(Error::InvalidInput(format!(
            "{w}x{h} image is smaller than the {support}px kernel support"
        )));
    }
    let u = img.unit_values();
    let mut planes = Vec::with_capacity(config.feature_count());
    planes.push(u.clone());
    let at = |r: isize, c: isize| -> usize {
        r.clamp(0, h as isize - 1) as usize * w + c.clamp(0, w as isize - 1) as usize
    };
    for &s in &config.scales_px {
        let kernel = gaussian_kernel(s as f64);
        let smooth = blur(&u, w, h, &kernel);
        let mut grad = vec![0.0; u.len()];
        let mut lap = vec![0.0; u.len()];
        for r in 0..h as isize {
            for c in 0..w as isize {
                let i = r as usize * w + c as usize;
                let (l, rt) = (smooth[at(r, c - 1)], smooth[at(r, c + 1)]);
                let (up, dn) = (smooth[at(r - 1, c)], smooth[at(r + 1, c)]);
                let gx = (rt - l) * 0.5;
                let gy = (dn - up) * 0.5;
                grad[i] = (gx * gx + gy * gy).sqrt();
                lap[i] = (l - smooth[i]) + (rt - smooth[i]) + (up - smooth[i]) + (dn - smooth[i]);
            }
        }
        let resid2: Vec<f64> = u.iter().zip(&smooth).map(|(a, b)| (a - b) * (a - b)).collect();
        let rough: Vec<f64> = blur(&resid2, w, h, &kernel)
            .into_iter()
            .map(|v| v.max(0.0).sqrt())
            .collect();
        planes.push(smooth);
        planes.push(grad);
        planes.push(rough);
        planes.push(lap);
    }
    if planes.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    Ok(FeatureStack {
        width: w,
        height: h,
        config: config.clone(),
        planes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, sd }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Pixels per mini-batch.
    pub batch: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Pixels sampled from each training image.
    pub pixels_per_sample: usize,
    pub val_frac: f64,
    /// Adds one augmented copy of every training image.
    pub augment: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: 1e-3,
            epochs: 50,
            seed: 0,
            batch: 64,
            patience: 5,
            pixels_per_sample: 20_000,
            val_frac: 0.1,
            augment: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub lr: f64,
    pub loss_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterModel {
    pub format_version: u32,
    pub config: FeatureConfig,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub train_pitch_um: f64,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMask {
    pub width: usize,
    pub height: usize,
    pub prob: Vec<f64>,
    pub ink: Vec<bool>,
}

/// Anything that maps a normalized image to a per-pixel ink prediction.
pub trait Segmenter {
    fn predict(&self, img: &NormalizedImage) -> Result<PredictionMask>;
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Composite objective `(1 - softDice) + mean(CE)` over a batch of
/// pre-standardized rows, with its gradient in `(weights, bias)`.
pub fn composite_loss(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &[f64],
    bias: f64,
) -> (f64, Vec<f64>, f64) {
    let d = weights.len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let idx: Vec<usize> = (0..rows.len()).collect();
    let mut params = weights.to_vec();
    params.push(bias);
    let mut grad = vec![0.0; d + 1];
    let mut scratch = Vec::new();
    let loss = batch_loss(&flat, d, &idx, labels, &params, &mut grad, &mut scratch);
    let gb = grad.pop().unwrap_or(0.0);
    (loss, grad, gb)
}

/// [`composite_loss`] on rows `idx` of a row-major matrix, writing the
/// gradient of `params = (weights, bias)` into `grad`.
fn batch_loss(
    xs: &[f64],
    d: usize,
    idx: &[usize],
    ys: &[bool],
    params: &[f64],
    grad: &mut [f64],
    probs: &mut Vec<f64>,
) -> f64 {
    let n = idx.len() as f64;
    let (w, bias) = (&params[..d], params[d]);
    probs.clear();
    let mut ce = 0.0;
    let mut inter = 0.0;
    let mut total = 0.0;
    for &i in idx {
        let row = &xs[i * d..(i + 1) * d];
        let z = row.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + bias;
        // shared e = exp(-|z|): p = sigmoid(z), -log p = softplus(-z),
        // -log(1-p) = softplus(z)
        let e = (-z.abs()).exp();
        let p = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
        let signed = if ys[i] { -z } else { z };
        ce += signed.max(0.0) + e.ln_1p();
        let yf = f64::from(u8::from(ys[i]));
        inter += p * yf;
        total += p + yf;
        probs.push(p);
    }
    ce /= n;
    let denom = total + DICE_SMOOTH;
    let dice = (2.0 * inter + DICE_SMOOTH) / denom;

    grad.iter_mut().for_each(|g| *g = 0.0);
    for (&i, &p) in idx.iter().zip(probs.iter()) {
        let yf = f64::from(u8::from(ys[i]));
        let d_dice_dp = (2.0 * yf * denom - (2.0 * inter + DICE_SMOOTH)) / (denom * denom);
        let dz = (p - yf) / n - d_dice_dp * p * (1.0 - p);
        for (g, x) in grad[..d].iter_mut().zip(&xs[i * d..(i + 1) * d]) {
            *g += dz * x;
        }
        grad[d] += dz;
    }
    ce + (1.0 - dice)
}

/// Pixels drawn from one image for training: raw feature rows and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelSet {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

/// Draws up to `count` pixels uniformly without replacement.
pub fn sample_pixels(
    features: &FeatureStack,
    labels: &LabelMask,
    count: usize,
    seed: u64,
) -> Result<PixelSet> {
    labels.check_dims(features.width, features.height)?;
    let mut idx: Vec<usize> = (0..features.len()).collect();
    if count < idx.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (chosen, _) = idx.partial_shuffle(&mut rng, count);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        idx = chosen;
    }
    Ok(PixelSet {
        rows: idx.iter().map(|&i| features.row(i)).collect(),
        labels: idx.iter().map(|&i| labels.ink[i]).collect(),
    })
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dim: usize) -> Self {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Fits a model on pooled pixel sets. Standardization statistics come from
/// the training split only; 10% (configurable) of pixels are held out for
/// early stopping.
pub fn train_on_pixels(
    sets: &[&PixelSet],
    config: &FeatureConfig,
    train_pitch_um: f64,
    hyper: &TrainHyper,
) -> Result<SegmenterModel> {
    let d = config.feature_count();
    let mut rows: Vec<(&Vec<f64>, bool)> = Vec::new();
    for s in sets {
        for (r, &y) in s.rows.iter().zip(&s.labels) {
            if r.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "pixel row has {} features, config expects {d}",
                    r.len()
                )));
            }
            rows.push((r, y));
        }
    }
    if rows.is_empty() {
        return Err(Error::Training("no training pixels".into()));
    }
    let positives = rows.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == rows.len() {
        return Err(Error::Training(
            "training set contains a single class".into(),
        ));
    }
    if hyper.batch == 0 || hyper.epochs == 0 {
        return Err(Error::Training("batch and epochs must be >= 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rows.shuffle(&mut rng);
    let n_val = ((rows.len() as f64 * hyper.val_frac).round() as usize).min(rows.len() - 1);
    let (val, train) = rows.split_at(n_val);

    let train_raw: Vec<Vec<f64>> = train.iter().map(|(r, _)| (*r).clone()).collect();
    let standardizer = Standardizer::fit(&train_raw);
    let xs: Vec<f64> = train_raw.iter().flat_map(|r| standardizer.apply(r)).collect();
    drop(train_raw);
    let ys: Vec<bool> = train.iter().map(|(_, y)| *y).collect();
    let vx: Vec<f64> = val.iter().flat_map(|(r, _)| standardizer.apply(r)).collect();
    let vy: Vec<bool> = val.iter().map(|(_, y)| *y).collect();
    let val_idx: Vec<usize> = (0..vy.len()).collect();

    let mut params = vec![0.0; d + 1];
    let mut grad = vec![0.0; d + 1];
    let mut scratch = Vec::with_capacity(hyper.batch.max(vy.len()));
    let mut adam = Adam::new(d + 1);
    let mut order: Vec<usize> = (0..ys.len()).collect();
    let mut loss_curve = Vec::new();
    let mut val_curve = Vec::new();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut since_best = 0usize;

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch) {
            let loss = batch_loss(&xs, d, chunk, &ys, &params, &mut grad, &mut scratch);
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite loss at epoch {epoch}")));
            }
            adam.step(&mut params, &grad, hyper.lr);
            epoch_loss += loss;
            batches += 1;
        }
        loss_curve.push(epoch_loss / batches as f64);

        let val_loss = if vy.is_empty() {
            loss_curve[epoch - 1]
        } else {
            batch_loss(&vx, d, &val_idx, &vy, &params, &mut grad, &mut scratch)
        };
        if !val_loss.is_finite() {
            return Err(Error::Training(format!("non-finite validation loss at epoch {epoch}")));
        }
        val_curve.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.patience {
                break;
            }
        }
    }

    let (_, params, best_epoch) = best;
    Ok(SegmenterModel {
        format_version: MODEL_FORMAT_VERSION,
        config: config.clone(),
        weights: params[..d].to_vec(),
        bias: params[d],
        standardizer,
        train_pitch_um,
        meta: TrainingMeta {
            seed: hyper.seed,
            epochs_run: loss_curve.len(),
            best_epoch,
            lr: hyper.lr,
            loss_curve,
            val_curve,
        },
    })
}

/// Trains on whole images: features, per-image pixel sampling (plus an
/// augmented copy of each image when `hyper.augment` is set), then
/// [`train_on_pixels`].
pub fn train(
    samples: &[(NormalizedImage, LabelMask)],
    config: &FeatureConfig,
    hyper: &TrainHyper,
) -> Result<SegmenterModel> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Training("no training samples".into()))?;
    let mut sets = Vec::new();
    for (i, (img, labels)) in samples.iter().enumerate() {
        labels.check_dims(img.width, img.height)?;
        let seed = hyper.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1));
        let f = extract_features_with(img, config)?;
        sets.push(sample_pixels(&f, labels, hyper.pixels_per_sample, seed)?);
        if hyper.augment {
            let (ai, al) = augment(img, labels, seed.rotate_left(17));
            let f = extract_features_with(&ai, config)?;
            sets.push(sample_pixels(&f, &al, hyper.pixels_per_sample, seed.rotate_left(29))?);
        }
    }
    let refs: Vec<&PixelSet> = sets.iter().collect();
    train_on_pixels(&refs, config, first.0.pitch_um, hyper)
}

impl SegmenterModel {
    /// Probability map from a precomputed feature stack.
    pub fn predict_features(&self, f: &FeatureStack) -> Result<PredictionMask> {
        let d = self.config.feature_count();
        if self.weights.len() != d
            || self.standardizer.mean.len() != d
            || self.standardizer.sd.len() != d
        {
            return Err(Error::DimensionMismatch(format!(
                "model has {} weights for {d} configured features",
                self.weights.len()
            )));
        }
        if f.config != self.config || f.planes.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "feature stack has {} planes, model expects {d}",
                f.planes.len()
            )));
        }
        let mut logit = vec![self.bias; f.len()];
        for ((plane, w), (m, s)) in f
            .planes
            .iter()
            .zip(&self.weights)
            .zip(self.standardizer.mean.iter().zip(&self.standardizer.sd))
        {
            let k = w / s;
            for (z, v) in logit.iter_mut().zip(plane) {
                *z += k * (v - m);
            }
        }
        let prob: Vec<f64> = logit.into_iter().map(sigmoid).collect();
        let ink = prob.iter().map(|&p| p >= 0.5).collect();
        Ok(PredictionMask {
            width: f.width,
            height: f.height,
            prob,
            ink,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: SegmenterModel = serde_json::from_str(&text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

impl Segmenter for SegmenterModel {
    fn predict(&self, img: &NormalizedImage) -> Result<PredictionMask> {
        if self.weights.len() != self.config.feature_count() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} weights for {} configured features",
                self.weights.len(),
                self.config.feature_count()
            )));
        }
        let f = extract_features_with(img, &self.config)?;
        self.predict_features(&f)
    }
}

/// Concrete augmentation draws. `AugmentParams::identity()` leaves inputs
/// untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentParams {
    pub flip_h: bool,
    pub flip_v: bool,
    /// Number of clockwise quarter turns.
    pub quarter_turns: u8,
    pub intensity_scale: f64,
    /// Control-grid displacements `(dx, dy)` in pixels, row-major over a
    /// `grid x grid` lattice spanning the image.
    pub warp: Vec<(f64, f64)>,
    pub grid: usize,
}

pub const WARP_GRID: usize = 4;
/// Maximum control-point displacement as a fraction of the shorter side.
pub const WARP_STRENGTH: f64 = 0.02;

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams {
            flip_h: false,
            flip_v: false,
            quarter_turns: 0,
            intensity_scale: 1.0,
            warp: vec![(0.0, 0.0); WARP_GRID * WARP_GRID],
            grid: WARP_GRID,
        }
    }

    pub fn draw(seed: u64, width: usize, height: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = WARP_STRENGTH * width.min(height) as f64;
        AugmentParams {
            flip_h: rng.random_bool(0.5),
            flip_v: rng.random_bool(0.5),
            quarter_turns: rng.random_range(0..4),
            intensity_scale: rng.random_range(0.9..=1.1),
            warp: (0..WARP_GRID * WARP_GRID)
                .map(|_| (rng.random_range(-amp..=amp), rng.random_range(-amp..=amp)))
                .collect(),
            grid: WARP_GRID,
        }
    }
}

fn transform_grid<T: Copy>(
    data: &[T],
    width: usize,
    height: usize,
    p: &AugmentParams,
) -> (Vec<T>, usize, usize) {
    let mut out = data.to_vec();
    let (mut w, mut h) = (width, height);
    if p.flip_h {
        for row in out.chunks_mut(w) {
            row.reverse();
        }
    }
    if p.flip_v {
        out = out.chunks(w).rev().flatten().copied().collect();
    }
    for _ in 0..p.quarter_turns % 4 {
        // clockwise: new[r][c] = old[h - 1 - c][r], new dims h x w
        let mut rot = Vec::with_capacity(out.len());
        for r in 0..w {
            for c in 0..h {
                rot.push(out[(h - 1 - c) * w + r]);
            }
        }
        out = rot;
        std::mem::swap(&mut w, &mut h);
    }
    (out, w, h)
}

fn displacement(p: &AugmentParams, width: usize, height: usize, r: usize, c: usize) -> (f64, f64) {
    let g = p.grid;
    let gx = if width > 1 { c as f64 / (width - 1) as f64 * (g - 1) as f64 } else { 0.0 };
    let gy = if height > 1 { r as f64 / (height - 1) as f64 * (g - 1) as f64 } else { 0.0 };
    let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(g - 1), (y0 + 1).min(g - 1));
    let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
    let at = |y: usize, x: usize| p.warp[y * g + x];
    let lerp = |a: (f64, f64), b: (f64, f64), t: f64| (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
    let top = lerp(at(y0, x0), at(y0, x1), fx);
    let bot = lerp(at(y1, x0), at(y1, x1), fx);
    lerp(top, bot, fy)
}

/// Applies flips, rotation, intensity scaling and an elastic warp (bilinear
/// for the image, nearest-neighbour for labels).
pub fn apply_augment(
    img: &NormalizedImage,
    labels: &LabelMask,
    p: &AugmentParams,
) -> (NormalizedImage, LabelMask) {
    let (pix, w, h) = transform_grid(&img.u16, img.width, img.height, p);
    let (ink, _, _) = transform_grid(&labels.ink, labels.width, labels.height, p);
    let warped = p.warp.iter().any(|&(dx, dy)| dx != 0.0 || dy != 0.0);
    let (pix, ink) = if warped {
        let mut out_pix = Vec::with_capacity(pix.len());
        let mut out_ink = Vec::with_capacity(ink.len());
        for r in 0..h {
            for c in 0..w {
                let (dx, dy) = displacement(p, w, h, r, c);
                let sx = (c as f64 + dx).clamp(0.0, (w - 1) as f64);
                let sy = (r as f64 + dy).clamp(0.0, (h - 1) as f64);
                let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                let v = |y: usize, x: usize| f64::from(pix[y * w + x]);
                let top = v(y0, x0) + (v(y0, x1) - v(y0, x0)) * fx;
                let bot = v(y1, x0) + (v(y1, x1) - v(y1, x0)) * fx;
                out_pix.push((top + (bot - top) * fy).round().clamp(0.0, 65535.0) as u16);
                out_ink.push(ink[sy.round() as usize * w + sx.round() as usize]);
            }
        }
        (out_pix, out_ink)
    } else {
        (pix, ink)
    };
    let pix = if p.intensity_scale != 1.0 {
        pix.into_iter()
            .map(|v| (f64::from(v) * p.intensity_scale).round().clamp(0.0, 65535.0) as u16)
            .collect()
    } else {
        pix
    };
    (
        NormalizedImage {
            width: w,
            height: h,
            u16: pix,
            ..img.clone()
        },
        LabelMask {
            width: w,
            height: h,
            ink,
        },
    )
}

pub fn augment(img: &NormalizedImage, labels: &LabelMask, seed: u64) -> (NormalizedImage, LabelMask) {
    let p = AugmentParams::draw(seed, img.width, img.height);
    apply_augment(img, labels, &p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::dice;

    fn image(w: usize, h: usize, f: impl Fn(usize, usize) -> u16) -> NormalizedImage {
        let px = (0..w * h).map(|i| f(i / w, i % w)).collect();
        NormalizedImage::from_u16(w, h, 0.34, px).unwrap()
    }

    #[test]
    fn feature_count_and_names() {
        let c = FeatureConfig::default();
        assert_eq!(c.feature_count(), 21);
        assert_eq!(c.feature_names().len(), 21);
        assert_eq!(c.max_support(), 97);
        assert_eq!(c.fitting(64, 200).unwrap().scales_px, vec![1, 2, 4, 8]);
        assert!(c.fitting(5, 5).is_none());
    }

    #[test]
    fn constant_image_has_flat_features() {
        let img = image(100, 100, |_, _| 12345);
        let f = extract_features(&img).unwrap();
        for (j, plane) in f.planes.iter().enumerate().skip(1) {
            if (j - 1) % 4 != 0 {
                assert!(plane.iter().all(|&v| v == 0.0), "feature {j}");
            }
        }
    }

    #[test]
    fn ramp_has_constant_gradient_and_zero_laplacian() {
        let img = image(120, 110, |_, c| (c * 300) as u16);
        let f = extract_features(&img).unwrap();
        let slope = 300.0 / 65535.0;
        let margin = 50;
        for (si, _) in f.config.scales_px.iter().enumerate() {
            let grad = &f.planes[1 + si * 4 + 1];
            let lap = &f.planes[1 + si * 4 + 3];
            for r in margin..110 - margin {
                for c in margin..120 - margin {
                    let i = r * 120 + c;
                    assert!((grad[i] - slope).abs() < 1e-12, "grad {} at scale {si}", grad[i]);
                    assert!(lap[i].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn too_small_image_is_rejected() {
        let img = image(50, 50, |r, c| (r + c) as u16);
        assert!(extract_features(&img).is_err());
    }

    fn rand_instance(rng: &mut ChaCha8Rng, d: usize) -> (Vec<Vec<f64>>, Vec<bool>, Vec<f64>, f64) {
        let rows = (0..64).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels = (0..64).map(|_| rng.random_bool(0.3)).collect();
        let w = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        (rows, labels, w, rng.random_range(-1.0..1.0))
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (rows, labels, w, b) = rand_instance(&mut rng, 5);
            let (_, gw, gb) = composite_loss(&rows, &labels, &w, b);
            let h = 1e-5;
            for j in 0..=w.len() {
                let eval = |delta: f64| {
                    let mut w2 = w.clone();
                    let mut b2 = b;
                    if j < w.len() {
                        w2[j] += delta;
                    } else {
                        b2 += delta;
                    }
                    composite_loss(&rows, &labels, &w2, b2).0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = if j < w.len() { gw[j] } else { gb };
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(rel <= 1e-4, "param {j}: {an} vs {fd}");
            }
        }
    }

    fn toy(seed: u64) -> (NormalizedImage, LabelMask) {
        // separable: ink wherever the normalized height is below 0.3
        let phase = seed as f64 * 0.7;
        let (w, h) = (160, 160);
        let px: Vec<u16> = (0..w * h)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                let base = ((r as f64 / 12.0 + phase).sin() * (c as f64 / 9.0).cos() + 1.0) / 2.0;
                (base * 65535.0).round() as u16
            })
            .collect();
        let ink = px.iter().map(|&v| f64::from(v) / 65535.0 < 0.3).collect();
        (
            NormalizedImage::from_u16(w, h, 0.34, px).unwrap(),
            LabelMask::new(w, h, ink).unwrap(),
        )
    }

    #[test]
    fn separable_toy_is_learned() {
        let data = vec![toy(1), toy(2)];
        let cfg = FeatureConfig { scales_px: vec![1, 2] };
        let hyper = TrainHyper {
            epochs: 50,
            ..TrainHyper::default()
        };
        let model = train(&data, &cfg, &hyper).unwrap();
        assert!(model.meta.epochs_run <= 50);
        for (img, labels) in &data {
            let pred = model.predict(img).unwrap();
            let d = dice(&pred.ink, &labels.ink).unwrap();
            assert!(d >= 0.99, "dice {d} after {} epochs", model.meta.epochs_run);
            // repeated prediction is identical
            assert_eq!(model.predict(img).unwrap(), pred);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let (img, _) = toy(1);
        let labels = LabelMask::empty(img.width, img.height);
        let cfg = FeatureConfig { scales_px: vec![1] };
        assert!(matches!(
            train(&[(img, labels)], &cfg, &TrainHyper::default()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn small_lr_decreases_loss_monotonically() {
        let (img, labels) = toy(4);
        let cfg = FeatureConfig { scales_px: vec![1, 2] };
        let f = extract_features_with(&img, &cfg).unwrap();
        let set = sample_pixels(&f, &labels, 2000, 1).unwrap();
        let hyper = TrainHyper {
            lr: 1e-5,
            epochs: 15,
            batch: 100_000,
            patience: 100,
            val_frac: 0.0,
            ..TrainHyper::default()
        };
        let model = train_on_pixels(&[&set], &cfg, 0.34, &hyper).unwrap();
        for w in model.meta.loss_curve.windows(2) {
            assert!(w[1] < w[0], "{:?}", model.meta.loss_curve);
        }
    }

    #[test]
    fn zero_model_predicts_half_everywhere() {
        let cfg = FeatureConfig { scales_px: vec![1] };
        let d = cfg.feature_count();
        let model = SegmenterModel {
            format_version: MODEL_FORMAT_VERSION,
            config: cfg,
            weights: vec![0.0; d],
            bias: 0.0,
            standardizer: Standardizer {
                mean: vec![0.0; d],
                sd: vec![1.0; d],
            },
            train_pitch_um: 0.34,
            meta: TrainingMeta {
                seed: 0,
                epochs_run: 0,
                best_epoch: 0,
                lr: 1e-3,
                loss_curve: vec![],
                val_curve: vec![],
            },
        };
        let (img, _) = toy(1);
        let p = model.predict(&img).unwrap();
        assert!(p.prob.iter().all(|&v| v == 0.5));
        assert!(p.ink.iter().all(|&v| v));

        let mut broken = model.clone();
        broken.weights.pop();
        assert!(matches!(broken.predict(&img), Err(Error::DimensionMismatch(_))));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        assert_eq!(SegmenterModel::load(&path).unwrap(), model);
    }

    #[test]
    fn identity_augment_and_double_flip() {
        let (img, labels) = toy(5);
        let (a, b) = apply_augment(&img, &labels, &AugmentParams::identity());
        assert_eq!((a, b), (img.clone(), labels.clone()));

        let flip = AugmentParams {
            flip_h: true,
            ..AugmentParams::identity()
        };
        let (once, l1) = apply_augment(&img, &labels, &flip);
        assert_ne!(once, img);
        let (twice, l2) = apply_augment(&once, &l1, &flip);
        assert_eq!((twice, l2), (img.clone(), labels.clone()));

        let turn = AugmentParams {
            quarter_turns: 4,
            ..AugmentParams::identity()
        };
        assert_eq!(apply_augment(&img, &labels, &turn).0, img);
    }

    #[test]
    fn elastic_warp_roughly_preserves_area() {
        let (w, h) = (256, 256);
        let ink: Vec<bool> = (0..w * h)
            .map(|i| {
                let (r, c) = ((i / w) as f64 - 128.0, (i % w) as f64 - 128.0);
                r * r + c * c <= 100.0 * 100.0
            })
            .collect();
        let labels = LabelMask::new(w, h, ink).unwrap();
        let img = NormalizedImage::from_u16(w, h, 0.34, vec![1000; w * h]).unwrap();
        let area = labels.ink_count() as f64;
        for seed in 0..100 {
            let (_, out) = augment(&img, &labels, seed);
            let rel = (out.ink_count() as f64 - area).abs() / area;
            assert!(rel < 0.05, "seed {seed}: {rel}");
        }
    }
}
