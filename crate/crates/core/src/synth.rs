//! Seeded synthetic papyrus heightmaps with ground-truth ink masks.
//!
//! Height is a tilt plane plus a cylindrical bow, two orthogonal half-sine
//! fiber lattices and band-limited micro-roughness. Inside glyph strokes
//! the roughness is attenuated and the surface is lowered, both feathered
//! towards the stroke edge. Finally a fixed fraction of pixels is dropped
//! to the missing sentinel uniformly at random.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmap_io::{
    write_heightmap, write_manifest, write_mask, DatasetManifest, HeightMap, LabelMask,
    ManifestEntry,
};
use crate::segment::{blur, gaussian_kernel};

/// Gaussian sigma of the roughness smoothing kernel, in pixels (a
/// correlation length of about 3 px).
pub const ROUGHNESS_SIGMA_PX: f64 = 1.5;
/// Fraction of the stroke width over which the ink relief ramps in from
/// the stroke edge.
pub const FEATHER_FRAC: f64 = 0.25;
/// Margin around the glyph box as a fraction of the shorter canvas side.
pub const GLYPH_MARGIN: f64 = 0.15;

/// Polyline strokes in a unit box (x right, y down), drawn with round caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphSpec {
    pub name: String,
    pub strokes: Vec<Vec<(f64, f64)>>,
}

fn circle(cx: f64, cy: f64, r: f64, from: f64, to: f64, steps: usize) -> Vec<(f64, f64)> {
    (0..=steps)
        .map(|i| {
            let a = from + (to - from) * i as f64 / steps as f64;
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

/// A small set of majuscule Greek-like letters.
pub fn builtin_glyphs() -> Vec<GlyphSpec> {
    let g = |name: &str, strokes: Vec<Vec<(f64, f64)>>| GlyphSpec {
        name: name.to_string(),
        strokes,
    };
    vec![
        g("alpha", vec![vec![(0.1, 1.0), (0.5, 0.0), (0.9, 1.0)], vec![(0.28, 0.6), (0.72, 0.6)]]),
        g("epsilon", vec![
            circle(0.55, 0.5, 0.45, 0.25 * PI, 1.75 * PI, 24),
            vec![(0.1, 0.5), (0.6, 0.5)],
        ]),
        g("omicron", vec![circle(0.5, 0.5, 0.45, 0.0, 2.0 * PI, 32)]),
        g("pi", vec![vec![(0.05, 0.0), (0.95, 0.0)], vec![(0.25, 0.0), (0.25, 1.0)], vec![(0.75, 0.0), (0.75, 1.0)]]),
        g("tau", vec![vec![(0.05, 0.0), (0.95, 0.0)], vec![(0.5, 0.0), (0.5, 1.0)]]),
        g("lambda", vec![vec![(0.1, 1.0), (0.5, 0.0), (0.9, 1.0)]]),
        g("nu", vec![vec![(0.15, 1.0), (0.15, 0.0), (0.85, 1.0), (0.85, 0.0)]]),
        g("eta", vec![vec![(0.15, 0.0), (0.15, 1.0)], vec![(0.85, 0.0), (0.85, 1.0)], vec![(0.15, 0.5), (0.85, 0.5)]]),
        g("sigma", vec![circle(0.55, 0.5, 0.45, 0.3 * PI, 1.7 * PI, 24)]),
        g("delta", vec![vec![(0.1, 1.0), (0.5, 0.0), (0.9, 1.0), (0.1, 1.0)]]),
    ]
}

pub fn glyph(name: &str) -> Option<GlyphSpec> {
    builtin_glyphs().into_iter().find(|g| g.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
    pub fiber_period_um: f64,
    pub fiber_amp_um: f64,
    pub tilt_um_per_mm: f64,
    pub curvature_um_per_mm2: f64,
    pub roughness_rms_um: f64,
    pub ink_depression_um: f64,
    /// Roughness multiplier inside ink (1 = no attenuation).
    pub ink_smoothing_factor: f64,
    pub stroke_width_um: f64,
    pub dropout_frac: f64,
    pub glyph: GlyphSpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            width: 1024,
            height: 1024,
            pitch_um: 0.34,
            fiber_period_um: 40.0,
            fiber_amp_um: 20.0,
            tilt_um_per_mm: 800.0,
            curvature_um_per_mm2: 2000.0,
            roughness_rms_um: 24.0,
            ink_depression_um: 16.0,
            ink_smoothing_factor: 0.3,
            stroke_width_um: 24.0,
            dropout_frac: 0.017,
            glyph: glyph("alpha").unwrap_or(GlyphSpec {
                name: "dot".into(),
                strokes: vec![vec![(0.5, 0.5)]],
            }),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let physical = [
            ("pitch_um", self.pitch_um),
            ("fiber_period_um", self.fiber_period_um),
            ("fiber_amp_um", self.fiber_amp_um),
            ("tilt_um_per_mm", self.tilt_um_per_mm),
            ("curvature_um_per_mm2", self.curvature_um_per_mm2),
            ("roughness_rms_um", self.roughness_rms_um),
            ("ink_depression_um", self.ink_depression_um),
            ("ink_smoothing_factor", self.ink_smoothing_factor),
            ("stroke_width_um", self.stroke_width_um),
            ("dropout_frac", self.dropout_frac),
        ];
        for (name, v) in physical {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.pitch_um <= 0.0 {
            return Err(Error::Config("pitch_um must be > 0".into()));
        }
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config(format!(
                "canvas must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if self.dropout_frac >= 0.5 {
            return Err(Error::Config(format!("dropout_frac must be < 0.5, got {}", self.dropout_frac)));
        }
        if self.ink_smoothing_factor > 1.0 {
            return Err(Error::Config(format!(
                "ink_smoothing_factor must be <= 1, got {}",
                self.ink_smoothing_factor
            )));
        }
        if self.glyph.strokes.is_empty() || self.glyph.strokes.iter().any(Vec::is_empty) {
            return Err(Error::Config(format!("glyph '{}' has an empty stroke", self.glyph.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub heightmap: HeightMap,
    pub labels: LabelMask,
}

/// Glyph skeleton mapped to pixel coordinates (pixel centres at `i + 0.5`).
fn place_glyph(cfg: &SynthConfig) -> Result<Vec<Vec<(f64, f64)>>> {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let side = w.min(h) * (1.0 - 2.0 * GLYPH_MARGIN);
    let (x0, y0) = ((w - side) / 2.0, (h - side) / 2.0);
    let mut out = Vec::new();
    for stroke in &cfg.glyph.strokes {
        let mut s = Vec::with_capacity(stroke.len());
        for &(u, v) in stroke {
            let p = (x0 + u * side, y0 + v * side);
            if !(p.0 >= 0.0 && p.0 <= w && p.1 >= 0.0 && p.1 <= h) {
                return Err(Error::InvalidInput(format!(
                    "glyph '{}' skeleton point ({u}, {v}) falls outside the canvas",
                    cfg.glyph.name
                )));
            }
            s.push(p);
        }
        out.push(s);
    }
    Ok(out)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// Distance in pixels from every pixel centre to the nearest stroke.
fn stroke_distance(strokes: &[Vec<(f64, f64)>], width: usize, height: usize) -> Vec<f64> {
    let segments: Vec<((f64, f64), (f64, f64))> = strokes
        .iter()
        .flat_map(|s| {
            if s.len() == 1 {
                vec![(s[0], s[0])]
            } else {
                s.windows(2).map(|w| (w[0], w[1])).collect()
            }
        })
        .collect();
    (0..width * height)
        .map(|i| {
            let p = ((i % width) as f64 + 0.5, (i / width) as f64 + 0.5);
            segments
                .iter()
                .map(|&(a, b)| segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Unit-variance band-limited noise: white Gaussian noise smoothed with a
/// small Gaussian kernel and rescaled by the kernel's energy.
fn roughness_field(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Vec<f64> {
    let white: Vec<f64> = (0..width * height).map(|_| rng.sample(StandardNormal)).collect();
    let kernel = gaussian_kernel(ROUGHNESS_SIGMA_PX);
    // the 2D kernel is separable, so its energy is the square of the 1D one
    let rms = kernel.iter().map(|w| w * w).sum::<f64>();
    blur(&white, width, height, &kernel)
        .into_iter()
        .map(|v| v / rms)
        .collect()
}

pub fn generate_sample(cfg: &SynthConfig) -> Result<SynthSample> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let strokes = place_glyph(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let tilt_dir = rng.random_range(0.0..2.0 * PI);
    let bow_dir = rng.random_range(0.0..PI);
    let fiber_angle: f64 = rng.random_range(-0.2..0.2);
    let phase1 = rng.random_range(0.0..PI);
    let phase2 = rng.random_range(0.0..PI);
    let noise = if cfg.roughness_rms_um > 0.0 {
        roughness_field(&mut rng, w, h)
    } else {
        vec![0.0; w * h]
    };

    let p = cfg.pitch_um;
    let stroke_px = cfg.stroke_width_um / p;
    let half = stroke_px / 2.0;
    let feather = (FEATHER_FRAC * stroke_px).max(f64::MIN_POSITIVE);
    let dist = stroke_distance(&strokes, w, h);
    let (cx, cy) = (w as f64 * p / 2.0, h as f64 * p / 2.0);
    let slope = cfg.tilt_um_per_mm / 1000.0;
    let bow = cfg.curvature_um_per_mm2 / 1e6;
    let (ca, sa) = (fiber_angle.cos(), fiber_angle.sin());
    let k = PI / cfg.fiber_period_um.max(f64::MIN_POSITIVE);

    let mut z = Vec::with_capacity(w * h);
    let mut ink = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let x = ((i % w) as f64 + 0.5) * p - cx;
        let y = ((i / w) as f64 + 0.5) * p - cy;
        let along = x * tilt_dir.cos() + y * tilt_dir.sin();
        let across = x * bow_dir.cos() + y * bow_dir.sin();
        let mut v = slope * along + bow * across * across;
        if cfg.fiber_amp_um > 0.0 {
            let u1 = x * ca + y * sa;
            let u2 = -x * sa + y * ca;
            v += cfg.fiber_amp_um * ((k * u1 + phase1).sin().abs() + (k * u2 + phase2).sin().abs());
        }
        let d = dist[i];
        let inside = d <= half;
        let s = if inside { smoothstep((half - d) / feather) } else { 0.0 };
        let attenuation = 1.0 - (1.0 - cfg.ink_smoothing_factor) * s;
        v += cfg.roughness_rms_um * attenuation * noise[i];
        v -= cfg.ink_depression_um * s;
        z.push(v);
        ink.push(inside);
    }

    let n_drop = (cfg.dropout_frac * (w * h) as f64).round() as usize;
    if n_drop > 0 {
        let mut idx: Vec<usize> = (0..w * h).collect();
        let (chosen, _) = idx.partial_shuffle(&mut rng, n_drop);
        for &i in chosen.iter() {
            z[i] = f64::NAN;
        }
    }

    let mut heightmap = HeightMap::new(w, h, p, z)?;
    heightmap.meta.insert("letter".into(), cfg.glyph.name.clone());
    heightmap.meta.insert("seed".into(), cfg.seed.to_string());
    heightmap.meta.insert("source".into(), "synthetic".into());
    Ok(SynthSample {
        heightmap,
        labels: LabelMask::new(w, h, ink)?,
    })
}

/// Per-papyrus perturbations of the base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PapyrusSpec {
    pub papyrus_id: String,
    pub n_samples: usize,
    pub fiber_period_scale: f64,
    pub roughness_scale: f64,
    pub ink_depression_scale: f64,
    /// Added to the base smoothing factor, result capped at 1.
    pub ink_smoothing_shift: f64,
}

impl PapyrusSpec {
    pub fn plain(id: &str, n_samples: usize) -> Self {
        PapyrusSpec {
            papyrus_id: id.to_string(),
            n_samples,
            fiber_period_scale: 1.0,
            roughness_scale: 1.0,
            ink_depression_scale: 1.0,
            ink_smoothing_shift: 0.0,
        }
    }

    pub fn apply(&self, base: &SynthConfig) -> SynthConfig {
        SynthConfig {
            fiber_period_um: base.fiber_period_um * self.fiber_period_scale,
            roughness_rms_um: base.roughness_rms_um * self.roughness_scale,
            ink_depression_um: base.ink_depression_um * self.ink_depression_scale,
            ink_smoothing_factor: (base.ink_smoothing_factor + self.ink_smoothing_shift).min(1.0),
            ..base.clone()
        }
    }
}

/// Three papyri with 5, 5 and 4 samples; the last has shallower, less
/// smoothed ink and is the hardest domain.
pub fn default_papyri() -> Vec<PapyrusSpec> {
    vec![
        PapyrusSpec::plain("P248", 5),
        PapyrusSpec {
            fiber_period_scale: 1.15,
            roughness_scale: 0.95,
            ink_depression_scale: 1.1,
            ..PapyrusSpec::plain("P250", 5)
        },
        PapyrusSpec {
            fiber_period_scale: 0.85,
            roughness_scale: 1.05,
            ink_depression_scale: 0.5,
            ink_smoothing_shift: 0.3,
            ..PapyrusSpec::plain("P500P2", 4)
        },
    ]
}

/// Configuration of every corpus sample with its sample id and papyrus id.
pub fn corpus_configs(base: &SynthConfig, papyri: &[PapyrusSpec]) -> Vec<(String, String, SynthConfig)> {
    let glyphs = builtin_glyphs();
    let mut out = Vec::new();
    for spec in papyri {
        for j in 0..spec.n_samples {
            let index = out.len();
            let mut cfg = spec.apply(base);
            cfg.seed = base.seed ^ index as u64;
            cfg.glyph = glyphs[index % glyphs.len()].clone();
            out.push((format!("{}_{j:02}", spec.papyrus_id), spec.papyrus_id.clone(), cfg));
        }
    }
    out
}

/// Generates every sample, writes `heightmaps/*.hmap`, `labels/*.pgm` and
/// `manifest.csv` under `out_dir`, and returns the manifest.
pub fn generate_corpus(
    base: &SynthConfig,
    papyri: &[PapyrusSpec],
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    let configs = corpus_configs(base, papyri);
    if configs.is_empty() {
        return Err(Error::Manifest("corpus would contain no samples".into()));
    }
    let hdir = out_dir.join("heightmaps");
    let ldir = out_dir.join("labels");
    for d in [&hdir, &ldir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let entries = configs
        .par_iter()
        .map(|(sample_id, papyrus_id, cfg)| {
            let mut s = generate_sample(cfg)?;
            s.heightmap.meta.insert("papyrus".into(), papyrus_id.clone());
            let hp: PathBuf = hdir.join(format!("{sample_id}.hmap"));
            let lp: PathBuf = ldir.join(format!("{sample_id}.pgm"));
            write_heightmap(&s.heightmap, &hp)?;
            write_mask(&s.labels, &lp)?;
            Ok(ManifestEntry {
                sample_id: sample_id.clone(),
                papyrus_id: papyrus_id.clone(),
                letter: cfg.glyph.name.clone(),
                heightmap_path: hp,
                label_path: lp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        format_version: 1,
        entries,
    };
    write_manifest(&manifest, out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::missingness_stats;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            width: 128,
            height: 96,
            stroke_width_um: 6.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn noiseless_stroke_is_exact() {
        let cfg = SynthConfig {
            width: 64,
            height: 64,
            roughness_rms_um: 0.0,
            fiber_amp_um: 0.0,
            tilt_um_per_mm: 0.0,
            curvature_um_per_mm2: 0.0,
            ink_depression_um: 0.5,
            dropout_frac: 0.0,
            stroke_width_um: 12.0 * 0.34,
            glyph: GlyphSpec {
                name: "bar".into(),
                strokes: vec![vec![(0.0, 0.5), (1.0, 0.5)]],
            },
            ..SynthConfig::default()
        };
        let s = generate_sample(&cfg).unwrap();
        // bar from x = 9.6 to 54.4 at y = 32, half width 6 px, core 3 px
        for r in 0..64 {
            for c in 0..64 {
                let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
                let dx = (9.6 - x).max(0.0).max(x - 54.4);
                let d = dx.hypot(y - 32.0);
                let z = s.heightmap.get(r, c);
                assert_eq!(s.labels.ink[r * 64 + c], d <= 6.0, "label at ({r},{c})");
                if d > 6.0 {
                    assert_eq!(z, 0.0);
                }
                if d <= 3.0 {
                    assert_eq!(z, -0.5);
                }
                assert!((-0.5..=0.0).contains(&z));
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_sample(&small(3)).unwrap();
        let b = generate_sample(&small(3)).unwrap();
        assert_eq!(
            crate::hmap_io::heightmap_to_string(&a.heightmap),
            crate::hmap_io::heightmap_to_string(&b.heightmap)
        );
        assert_eq!(a.labels, b.labels);
        let c = generate_sample(&small(4)).unwrap();
        assert_ne!(
            crate::hmap_io::heightmap_to_string(&a.heightmap),
            crate::hmap_io::heightmap_to_string(&c.heightmap)
        );
    }

    #[test]
    fn dropout_count_is_exact() {
        let cfg = small(1);
        let s = generate_sample(&cfg).unwrap();
        let expected = (cfg.dropout_frac * (128 * 96) as f64).round() as usize;
        assert_eq!(s.heightmap.missing_count(), expected);
    }

    #[test]
    fn ink_is_lower_and_smoother() {
        let cfg = SynthConfig {
            width: 256,
            height: 256,
            stroke_width_um: 12.0,
            dropout_frac: 0.0,
            tilt_um_per_mm: 0.0,
            curvature_um_per_mm2: 0.0,
            ..SynthConfig::default()
        };
        let s = generate_sample(&cfg).unwrap();
        let z = s.heightmap.values();
        let smooth = blur(z, 256, 256, &gaussian_kernel(3.0));
        let (mut mi, mut mo, mut ri, mut ro, mut ni, mut no) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..z.len() {
            let hp = (z[i] - smooth[i]).powi(2);
            if s.labels.ink[i] {
                mi += z[i];
                ri += hp;
                ni += 1.0;
            } else {
                mo += z[i];
                ro += hp;
                no += 1.0;
            }
        }
        assert!(mi / ni < mo / no);
        assert!((ri / ni).sqrt() < (ro / no).sqrt());
    }

    #[test]
    fn skeleton_outside_canvas_is_rejected() {
        let cfg = SynthConfig {
            glyph: GlyphSpec {
                name: "far".into(),
                strokes: vec![vec![(-0.5, 0.5), (0.5, 0.5)]],
            },
            ..small(0)
        };
        assert!(generate_sample(&cfg).is_err());
        let bad = SynthConfig {
            dropout_frac: 0.5,
            ..small(0)
        };
        assert!(matches!(generate_sample(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn dropout_is_independent_of_ink() {
        for seed in 0..5 {
            let s = generate_sample(&SynthConfig {
                width: 256,
                height: 256,
                stroke_width_um: 12.0,
                ..small(seed)
            })
            .unwrap();
            let m = missingness_stats(&s.heightmap, &s.labels).unwrap();
            assert!((m.frac_total - 0.017).abs() < 0.005);
            assert!(m.dice_missing_vs_ink < 0.1);
        }
    }

    #[test]
    fn corpus_layout_and_determinism() {
        let base = SynthConfig {
            width: 48,
            height: 48,
            stroke_width_um: 3.0,
            ..SynthConfig::default()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m1 = generate_corpus(&base, &default_papyri(), d1.path()).unwrap();
        let m2 = generate_corpus(&base, &default_papyri(), d2.path()).unwrap();
        assert_eq!(m1.len(), 14);
        assert_eq!(m1.papyri(), vec!["P248", "P250", "P500P2"]);
        for (a, b) in m1.entries.iter().zip(&m2.entries) {
            assert_eq!(fs::read(&a.heightmap_path).unwrap(), fs::read(&b.heightmap_path).unwrap());
            assert_eq!(fs::read(&a.label_path).unwrap(), fs::read(&b.label_path).unwrap());
        }
        assert_eq!(
            fs::read(d1.path().join("manifest.csv")).unwrap(),
            fs::read(d2.path().join("manifest.csv")).unwrap()
        );
        let reread = crate::hmap_io::read_manifest(d1.path().join("manifest.csv")).unwrap();
        assert_eq!(reread.entries, m1.entries);

        let none: Vec<PapyrusSpec> = default_papyri()
            .into_iter()
            .map(|p| PapyrusSpec { n_samples: 0, ..p })
            .collect();
        assert!(generate_corpus(&base, &none, d1.path()).is_err());
    }
}
