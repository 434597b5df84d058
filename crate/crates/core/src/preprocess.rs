//! Validity masking, fast-marching inpainting of missing pixels, and
//! per-sample normalization to 16-bit images.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::eval::dice;
use crate::hmap_io::{HeightMap, LabelMask, ValidityMask};

pub const DEFAULT_INPAINT_RADIUS: usize = 3;

/// Robust band used to build the temporary 8-bit inpainting map.
pub const ROBUST_LO_PERCENTILE: f64 = 0.5;
pub const ROBUST_HI_PERCENTILE: f64 = 99.5;

/// Lower bound on the directional weight so pixels orthogonal to the
/// front normal still contribute.
const TELEA_EPS: f64 = 1e-6;
const FAR_TIME: f64 = 1e6;

/// Percentile of an ascending slice by linear interpolation between closest
/// ranks at position `(n - 1) * q / 100`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let pos = (sorted.len() - 1) as f64 * (q / 100.0).clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Percentile of unsorted finite values (see [`percentile_sorted`]).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, q)
}

pub fn validity_mask(h: &HeightMap) -> ValidityMask {
    ValidityMask {
        width: h.width(),
        height: h.height(),
        m: h.values().iter().map(|v| v.is_finite()).collect(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flag {
    Known,
    Band,
    Inside,
}

#[derive(PartialEq)]
struct Front {
    t: f64,
    idx: usize,
}

impl Eq for Front {}

impl Ord for Front {
    // min-heap on arrival time, ties broken by lower pixel index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Fmm<'a> {
    w: usize,
    h: usize,
    radius: usize,
    flags: Vec<Flag>,
    t: Vec<f64>,
    img: &'a mut [u8],
}

impl Fmm<'_> {
    fn neighbor(&self, idx: usize, dr: isize, dc: isize) -> Option<usize> {
        let r = (idx / self.w) as isize + dr;
        let c = (idx % self.w) as isize + dc;
        (r >= 0 && c >= 0 && (r as usize) < self.h && (c as usize) < self.w)
            .then(|| r as usize * self.w + c as usize)
    }

    fn arrival(&self, idx: Option<usize>) -> Option<f64> {
        idx.filter(|&i| self.flags[i] != Flag::Inside).map(|i| self.t[i])
    }

    fn solve(&self, a: Option<usize>, b: Option<usize>) -> f64 {
        match (self.arrival(a), self.arrival(b)) {
            (Some(t1), Some(t2)) => {
                let d = t1 - t2;
                if d.abs() >= 1.0 {
                    1.0 + t1.min(t2)
                } else {
                    (t1 + t2 + (2.0 - d * d).sqrt()) * 0.5
                }
            }
            (Some(t1), None) => 1.0 + t1,
            (None, Some(t2)) => 1.0 + t2,
            (None, None) => 1.0 + FAR_TIME,
        }
    }

    fn arrival_time(&self, idx: usize) -> f64 {
        let up = self.neighbor(idx, -1, 0);
        let down = self.neighbor(idx, 1, 0);
        let left = self.neighbor(idx, 0, -1);
        let right = self.neighbor(idx, 0, 1);
        self.solve(up, left)
            .min(self.solve(down, left))
            .min(self.solve(up, right))
            .min(self.solve(down, right))
    }

    fn gradient_1d(&self, idx: usize, minus: Option<usize>, plus: Option<usize>) -> f64 {
        match (self.arrival(minus), self.arrival(plus)) {
            (Some(m), Some(p)) => (p - m) * 0.5,
            (None, Some(p)) => p - self.t[idx],
            (Some(m), None) => self.t[idx] - m,
            (None, None) => 0.0,
        }
    }

    /// Weighted average of already-known pixels within the radius, using
    /// direction, geometric distance and level-set distance weights.
    fn fill(&mut self, idx: usize) {
        let gx = self.gradient_1d(idx, self.neighbor(idx, 0, -1), self.neighbor(idx, 0, 1));
        let gy = self.gradient_1d(idx, self.neighbor(idx, -1, 0), self.neighbor(idx, 1, 0));
        let gnorm = gx.hypot(gy);
        let (row, col) = ((idx / self.w) as isize, (idx % self.w) as isize);
        let r = self.radius as isize;
        let t_p = self.t[idx];
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for k in (row - r).max(0)..=(row + r).min(self.h as isize - 1) {
            for l in (col - r).max(0)..=(col + r).min(self.w as isize - 1) {
                let (ry, rx) = ((row - k) as f64, (col - l) as f64);
                let len2 = rx * rx + ry * ry;
                if len2 == 0.0 || len2 > (r * r) as f64 {
                    continue;
                }
                let q = k as usize * self.w + l as usize;
                if self.flags[q] == Flag::Inside {
                    continue;
                }
                let len = len2.sqrt();
                let dir = if gnorm > 0.0 {
                    ((rx * gx + ry * gy) / (len * gnorm)).abs()
                } else {
                    0.0
                }
                .max(TELEA_EPS);
                let dst = 1.0 / len2;
                let lev = 1.0 / (1.0 + (self.t[q] - t_p).abs());
                let wt = dir * dst * lev;
                acc += wt * f64::from(self.img[q]);
                wsum += wt;
            }
        }
        if wsum > 0.0 {
            self.img[idx] = (acc / wsum).round().clamp(0.0, 255.0) as u8;
        }
    }

    fn run(&mut self) {
        let mut heap = BinaryHeap::new();
        for idx in 0..self.w * self.h {
            if self.flags[idx] != Flag::Known {
                continue;
            }
            let touches_hole = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .filter_map(|&(dr, dc)| self.neighbor(idx, dr, dc))
                .any(|n| self.flags[n] == Flag::Inside);
            if touches_hole {
                self.flags[idx] = Flag::Band;
                heap.push(Front { t: 0.0, idx });
            }
        }
        while let Some(Front { idx, .. }) = heap.pop() {
            self.flags[idx] = Flag::Known;
            for (dr, dc) in [(-1, 0), (0, -1), (1, 0), (0, 1)] {
                let Some(n) = self.neighbor(idx, dr, dc) else {
                    continue;
                };
                if self.flags[n] != Flag::Inside {
                    continue;
                }
                self.t[n] = self.arrival_time(n);
                self.fill(n);
                self.flags[n] = Flag::Band;
                heap.push(Front { t: self.t[n], idx: n });
            }
        }
    }
}

/// Fills missing pixels with fast-marching inpainting on a temporary 8-bit
/// map, then restores every originally finite pixel bit-exactly.
pub fn inpaint_missing(h: &HeightMap, radius_px: usize) -> Result<HeightMap> {
    if radius_px == 0 {
        return Err(Error::InvalidInput("inpainting radius must be >= 1".into()));
    }
    let mut finite: Vec<f64> = h.values().iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::NoFinitePixels);
    }
    if finite.len() == h.len() {
        return Ok(h.clone());
    }
    finite.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&finite, ROBUST_LO_PERCENTILE);
    let hi = percentile_sorted(&finite, ROBUST_HI_PERCENTILE);
    if hi <= lo {
        let z = h
            .values()
            .iter()
            .map(|&v| if v.is_finite() { v } else { lo })
            .collect();
        return h.with_values(z);
    }

    let span = hi - lo;
    let mut img: Vec<u8> = h
        .values()
        .iter()
        .map(|&v| {
            if v.is_finite() {
                (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    let flags = h
        .values()
        .iter()
        .map(|v| if v.is_finite() { Flag::Known } else { Flag::Inside })
        .collect::<Vec<_>>();
    let t = flags
        .iter()
        .map(|f| if *f == Flag::Inside { FAR_TIME } else { 0.0 })
        .collect();
    Fmm {
        w: h.width(),
        h: h.height(),
        radius: radius_px,
        flags,
        t,
        img: &mut img,
    }
    .run();

    let z = h
        .values()
        .iter()
        .zip(&img)
        .map(|(&v, &q)| {
            if v.is_finite() {
                v
            } else {
                lo + f64::from(q) / 255.0 * span
            }
        })
        .collect();
    h.with_values(z)
}

/// Heights mapped affinely to `[0, 65535]` by the sample's min and max.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
    pub u16: Vec<u16>,
    pub z_min_um: f64,
    pub z_max_um: f64,
    /// Set when the input was constant; all pixels are then 0.
    pub degenerate: bool,
}

impl NormalizedImage {
    pub fn from_u16(width: usize, height: usize, pitch_um: f64, u16: Vec<u16>) -> Result<Self> {
        if u16.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                u16.len()
            )));
        }
        Ok(NormalizedImage {
            width,
            height,
            pitch_um,
            u16,
            z_min_um: 0.0,
            z_max_um: 1.0,
            degenerate: false,
        })
    }

    /// Pixel values as fractions in `[0, 1]`.
    pub fn unit_values(&self) -> Vec<f64> {
        self.u16.iter().map(|&v| f64::from(v) / 65535.0).collect()
    }
}

pub fn normalize_u16(h: &HeightMap) -> Result<NormalizedImage> {
    h.require_finite("normalize_u16")?;
    let (min, max) = h
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let degenerate = max <= min;
    let u16 = if degenerate {
        vec![0; h.len()]
    } else {
        let span = max - min;
        h.values()
            .iter()
            .map(|&v| (((v - min) / span).clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect()
    };
    Ok(NormalizedImage {
        width: h.width(),
        height: h.height(),
        pitch_um: h.pitch_um(),
        u16,
        z_min_um: min,
        z_max_um: max,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MissingnessStats {
    pub frac_total: f64,
    pub frac_ink: f64,
    pub frac_papyrus: f64,
    pub dice_missing_vs_ink: f64,
}

/// Non-finite pixel fractions overall, inside ink and inside papyrus, plus
/// the Dice overlap between the missingness mask and the ink mask.
pub fn missingness_stats(h_raw: &HeightMap, labels: &LabelMask) -> Result<MissingnessStats> {
    labels.check_dims(h_raw.width(), h_raw.height())?;
    let missing: Vec<bool> = h_raw.values().iter().map(|v| !v.is_finite()).collect();
    let (mut miss_ink, mut n_ink, mut miss_pap, mut n_pap) = (0usize, 0usize, 0usize, 0usize);
    for (&m, &ink) in missing.iter().zip(&labels.ink) {
        if ink {
            n_ink += 1;
            miss_ink += m as usize;
        } else {
            n_pap += 1;
            miss_pap += m as usize;
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(MissingnessStats {
        frac_total: frac(miss_ink + miss_pap, missing.len()),
        frac_ink: frac(miss_ink, n_ink),
        frac_papyrus: frac(miss_pap, n_pap),
        dice_missing_vs_ink: dice(&missing, &labels.ink)?,
    })
}
