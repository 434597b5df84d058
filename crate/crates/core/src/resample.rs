//! Synthetic resolution degradation: block averaging, bilinear upsampling
//! and vertical binning of physical heights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmap_io::{HeightMap, LabelMask};

pub const NATIVE_PITCH_UM: f64 = 0.34;
pub const DEFAULT_KERNELS: [usize; 9] = [1, 2, 3, 4, 6, 8, 10, 16, 32];

/// `pitch * n`, snapped to a 1e-9 µm grid so that e.g. `0.34 * 10` is
/// exactly `3.4`.
pub fn scaled_pitch(pitch_um: f64, n: usize) -> f64 {
    ((pitch_um * n as f64) * 1e9).round() / 1e9
}

/// Block-averaging kernel sizes and the lateral pitch each one produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchLadder {
    pub kernels: Vec<usize>,
    pub pitches_um: Vec<f64>,
}

impl PitchLadder {
    pub fn new(native_pitch_um: f64, kernels: &[usize]) -> Result<Self> {
        if kernels.is_empty() || kernels.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "ladder kernels must be non-empty and >= 1, got {kernels:?}"
            )));
        }
        if kernels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "ladder kernels must be strictly increasing, got {kernels:?}"
            )));
        }
        Ok(PitchLadder {
            kernels: kernels.to_vec(),
            pitches_um: kernels.iter().map(|&n| scaled_pitch(native_pitch_um, n)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.kernels.iter().copied().zip(self.pitches_um.iter().copied())
    }
}

impl Default for PitchLadder {
    fn default() -> Self {
        PitchLadder::new(NATIVE_PITCH_UM, &DEFAULT_KERNELS).expect("default ladder is valid")
    }
}

/// Largest top-left region whose sides are multiples of `n`.
pub fn cropped_dims(width: usize, height: usize, n: usize) -> (usize, usize) {
    ((width / n) * n, (height / n) * n)
}

pub fn crop(h: &HeightMap, width: usize, height: usize) -> Result<HeightMap> {
    if width > h.width() || height > h.height() || width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "cannot crop {}x{} to {width}x{height}",
            h.width(),
            h.height()
        )));
    }
    if width == h.width() && height == h.height() {
        return Ok(h.clone());
    }
    let z = (0..height)
        .flat_map(|r| h.values()[r * h.width()..r * h.width() + width].iter().copied())
        .collect();
    h.with_geometry(width, height, h.pitch_um(), z)
}

pub fn crop_labels(m: &LabelMask, width: usize, height: usize) -> Result<LabelMask> {
    if width > m.width || height > m.height {
        return Err(Error::InvalidInput(format!(
            "cannot crop {}x{} mask to {width}x{height}",
            m.width, m.height
        )));
    }
    let ink = (0..height)
        .flat_map(|r| m.ink[r * m.width..r * m.width + width].iter().copied())
        .collect();
    LabelMask::new(width, height, ink)
}

/// Mean of each `n x n` block after cropping to a multiple of `n`.
pub fn block_downsample(h: &HeightMap, n: usize) -> Result<HeightMap> {
    h.require_finite("block_downsample")?;
    if n == 0 || n > h.width() || n > h.height() {
        return Err(Error::InvalidInput(format!(
            "block size {n} invalid for {}x{} map",
            h.width(),
            h.height()
        )));
    }
    if n == 1 {
        return Ok(h.clone());
    }
    let (ow, oh) = (h.width() / n, h.height() / n);
    let src = h.values();
    let inv = 1.0 / (n * n) as f64;
    let mut z = vec![0.0; ow * oh];
    for by in 0..oh {
        let out_row = &mut z[by * ow..(by + 1) * ow];
        for r in by * n..(by + 1) * n {
            let row = &src[r * h.width()..r * h.width() + ow * n];
            for (bx, o) in out_row.iter_mut().enumerate() {
                *o += row[bx * n..(bx + 1) * n].iter().sum::<f64>();
            }
        }
        for o in out_row.iter_mut() {
            *o *= inv;
        }
    }
    h.with_geometry(ow, oh, scaled_pitch(h.pitch_um(), n), z)
}

/// Block-majority downsampling of a label mask: a block is ink when at
/// least half its pixels are ink.
pub fn block_downsample_labels(m: &LabelMask, n: usize) -> Result<LabelMask> {
    if n == 0 || n > m.width || n > m.height {
        return Err(Error::InvalidInput(format!(
            "block size {n} invalid for {}x{} mask",
            m.width, m.height
        )));
    }
    let (ow, oh) = (m.width / n, m.height / n);
    let mut ink = vec![false; ow * oh];
    for by in 0..oh {
        for bx in 0..ow {
            let mut count = 0usize;
            for r in by * n..(by + 1) * n {
                count += m.ink[r * m.width + bx * n..r * m.width + (bx + 1) * n]
                    .iter()
                    .filter(|v| **v)
                    .count();
            }
            ink[by * ow + bx] = 2 * count >= n * n;
        }
    }
    LabelMask::new(ow, oh, ink)
}

/// Per-output-pixel source position and blend weight along one axis, with
/// pixel-centre alignment and edge clamping.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|x| {
            let s = ((x as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

pub fn bilinear_upsample(
    h: &HeightMap,
    target_w: usize,
    target_h: usize,
    target_pitch_um: f64,
) -> Result<HeightMap> {
    h.require_finite("bilinear_upsample")?;
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidInput(format!(
            "upsample target must be positive, got {target_w}x{target_h}"
        )));
    }
    if target_w < h.width() || target_h < h.height() {
        return Err(Error::InvalidInput(format!(
            "upsample target {target_w}x{target_h} smaller than source {}x{}",
            h.width(),
            h.height()
        )));
    }
    let xs = axis_taps(h.width(), target_w);
    let ys = axis_taps(h.height(), target_h);
    let src = h.values();
    let sw = h.width();
    let mut z = Vec::with_capacity(target_w * target_h);
    for &(y0, y1, fy) in &ys {
        let r0 = &src[y0 * sw..(y0 + 1) * sw];
        let r1 = &src[y1 * sw..(y1 + 1) * sw];
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
            z.push(top + (bot - top) * fy);
        }
    }
    h.with_geometry(target_w, target_h, target_pitch_um, z)
}

/// Block average by `n`, then bilinear upsampling back to the cropped
/// native grid at the native pitch.
pub fn degrade_roundtrip(h: &HeightMap, n: usize) -> Result<HeightMap> {
    let (cw, ch) = cropped_dims(h.width(), h.height(), n);
    if n == 1 {
        return crop(h, cw, ch);
    }
    let coarse = block_downsample(h, n)?;
    bilinear_upsample(&coarse, cw, ch, h.pitch_um())
}

/// Quantizes heights to the centres of uniform bins of width `delta_um`
/// anchored at 0 µm.
pub fn zbin(h: &HeightMap, delta_um: f64) -> Result<HeightMap> {
    h.require_finite("zbin")?;
    if !(delta_um.is_finite() && delta_um > 0.0) {
        return Err(Error::InvalidInput(format!(
            "z-bin width must be positive, got {delta_um}"
        )));
    }
    let z = h.values().iter().map(|&v| zbin_value(v, delta_um)).collect();
    h.with_values(z)
}

pub fn zbin_value(z: f64, delta_um: f64) -> f64 {
    ((z / delta_um).floor() + 0.5) * delta_um
}
