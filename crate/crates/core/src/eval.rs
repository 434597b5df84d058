//! Dice scoring, fold plans and the experimental regimes: matched
//! resolution, cross resolution, z-binned inputs and leave-one-papyrus-out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmap_io::{read_heightmap, read_mask, DatasetManifest, HeightMap, LabelMask};
use crate::preprocess::{inpaint_missing, normalize_u16, NormalizedImage, DEFAULT_INPAINT_RADIUS};
use crate::resample::{
    block_downsample, block_downsample_labels, crop_labels, cropped_dims, degrade_roundtrip, zbin,
    PitchLadder,
};
use crate::segment::{
    augment, extract_features_with, sample_pixels, train_on_pixels, FeatureConfig, PixelSet,
    SegmenterModel, TrainHyper,
};
use crate::stats::{summarize, PairedMatrix};

/// `2|a ∩ b| / (|a| + |b|)`, with two empty masks scoring 1.
pub fn dice(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "dice on masks of {} and {} pixels",
            a.len(),
            b.len()
        )));
    }
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

pub fn dice_masks(a: &LabelMask, b: &LabelMask) -> Result<f64> {
    b.check_dims(a.width, a.height)?;
    dice(&a.ink, &b.ink)
}

pub const CV_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKind {
    Cv5,
    Lopo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub kind: FoldKind,
    pub seed: u64,
    pub n_folds: usize,
    /// Sample ids in manifest order.
    pub sample_ids: Vec<String>,
    pub assignments: BTreeMap<String, usize>,
    /// Papyrus id for each LOPO fold; empty for cv5.
    pub fold_papyri: Vec<String>,
}

impl FoldPlan {
    pub fn fold_of(&self, sample_id: &str) -> Option<usize> {
        self.assignments.get(sample_id).copied()
    }

    pub fn test_ids(&self, fold: usize) -> Vec<&str> {
        self.sample_ids
            .iter()
            .filter(|s| self.assignments[*s] == fold)
            .map(String::as_str)
            .collect()
    }

    pub fn train_ids(&self, fold: usize) -> Vec<&str> {
        self.sample_ids
            .iter()
            .filter(|s| self.assignments[*s] != fold)
            .map(String::as_str)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for f in self.assignments.values() {
            sizes[*f] += 1;
        }
        sizes
    }
}

fn plan_from_ids(ids: &[(String, String)], kind: FoldKind, seed: u64) -> Result<FoldPlan> {
    let sample_ids: Vec<String> = ids.iter().map(|(s, _)| s.clone()).collect();
    let mut assignments = BTreeMap::new();
    let mut fold_papyri = Vec::new();
    match kind {
        FoldKind::Cv5 => {
            if ids.len() < CV_FOLDS {
                return Err(Error::InvalidInput(format!(
                    "{} samples cannot fill {CV_FOLDS} folds",
                    ids.len()
                )));
            }
            let mut shuffled = sample_ids.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            for (i, s) in shuffled.into_iter().enumerate() {
                assignments.insert(s, i % CV_FOLDS);
            }
        }
        FoldKind::Lopo => {
            for (_, p) in ids {
                if !fold_papyri.contains(p) {
                    fold_papyri.push(p.clone());
                }
            }
            if fold_papyri.len() < 2 {
                return Err(Error::InvalidInput(
                    "leave-one-papyrus-out needs at least 2 papyri".into(),
                ));
            }
            for (s, p) in ids {
                let f = fold_papyri.iter().position(|q| q == p).unwrap_or(0);
                assignments.insert(s.clone(), f);
            }
        }
    }
    let n_folds = match kind {
        FoldKind::Cv5 => CV_FOLDS,
        FoldKind::Lopo => fold_papyri.len(),
    };
    Ok(FoldPlan {
        kind,
        seed,
        n_folds,
        sample_ids,
        assignments,
        fold_papyri,
    })
}

pub fn make_folds(manifest: &DatasetManifest, kind: FoldKind, seed: u64) -> Result<FoldPlan> {
    let ids: Vec<(String, String)> = manifest
        .entries
        .iter()
        .map(|e| (e.sample_id.clone(), e.papyrus_id.clone()))
        .collect();
    plan_from_ids(&ids, kind, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Matched,
    CrossRes,
    Zbin,
    Lopo,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Matched, Regime::CrossRes, Regime::Zbin, Regime::Lopo];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Matched => "matched",
            Regime::CrossRes => "cross_res",
            Regime::Zbin => "zbin",
            Regime::Lopo => "lopo",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown regime '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sample_id: String,
    pub papyrus_id: String,
    pub regime: Regime,
    pub pitch_um: f64,
    pub dice: f64,
    pub fold: usize,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record(["sample_id", "papyrus_id", "regime", "pitch_um", "dice", "fold", "model_id"])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidInput(format!("csv flush: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "result table not found"),
            ));
        }
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(ResultTable { rows })
    }

    pub fn regime(&self, regime: Regime) -> ResultTable {
        ResultTable {
            rows: self.rows.iter().filter(|r| r.regime == regime).cloned().collect(),
        }
    }

    /// Distinct pitches in ascending order.
    pub fn pitches(&self) -> Vec<f64> {
        let mut p: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !p.contains(&r.pitch_um) {
                p.push(r.pitch_um);
            }
        }
        p.sort_by(f64::total_cmp);
        p
    }

    pub fn dice_at(&self, pitch_um: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.pitch_um == pitch_um)
            .map(|r| r.dice)
            .collect()
    }

    /// Median Dice per pitch, ascending by pitch.
    pub fn medians(&self) -> Result<Vec<(f64, f64)>> {
        self.pitches()
            .into_iter()
            .map(|p| Ok((p, summarize(&self.dice_at(p))?.median)))
            .collect()
    }

    /// Samples (rows, in first-appearance order) by pitches (columns,
    /// ascending). Every sample must have exactly one score per pitch.
    pub fn paired(&self) -> Result<PairedMatrix> {
        let pitches = self.pitches();
        let mut samples: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !samples.contains(&r.sample_id.as_str()) {
                samples.push(&r.sample_id);
            }
        }
        let mut cells: BTreeMap<(&str, usize), f64> = BTreeMap::new();
        for r in &self.rows {
            let j = pitches.iter().position(|&p| p == r.pitch_um).unwrap_or(0);
            if cells.insert((r.sample_id.as_str(), j), r.dice).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate score for sample {} at pitch {}",
                    r.sample_id, r.pitch_um
                )));
            }
        }
        let mut values = Vec::with_capacity(samples.len());
        for s in &samples {
            let mut row = Vec::with_capacity(pitches.len());
            for (j, p) in pitches.iter().enumerate() {
                row.push(*cells.get(&(*s, j)).ok_or_else(|| {
                    Error::InvalidInput(format!("sample {s} lacks a score at pitch {p}"))
                })?);
            }
            values.push(row);
        }
        PairedMatrix::new(values, pitches.iter().map(|p| p.to_string()).collect())
    }
}

/// One manifest entry loaded and gap-filled at native pitch.
#[derive(Debug, Clone)]
pub struct CorpusSample {
    pub sample_id: String,
    pub papyrus_id: String,
    pub filled: HeightMap,
    pub labels: LabelMask,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub samples: Vec<CorpusSample>,
}

impl Corpus {
    pub fn load(manifest: &DatasetManifest, inpaint_radius: usize) -> Result<Self> {
        let samples = manifest
            .entries
            .par_iter()
            .map(|e| {
                let raw = read_heightmap(&e.heightmap_path)?;
                let labels = read_mask(&e.label_path)?;
                labels.check_dims(raw.width(), raw.height())?;
                Ok(CorpusSample {
                    sample_id: e.sample_id.clone(),
                    papyrus_id: e.papyrus_id.clone(),
                    filled: inpaint_missing(&raw, inpaint_radius)?,
                    labels,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::from_samples(samples)
    }

    /// Builds a corpus from in-memory pairs; heights must already be
    /// fully finite.
    pub fn from_samples(samples: Vec<CorpusSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Manifest("corpus has no samples".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &samples {
            if !seen.insert(s.sample_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate sample_id '{}'", s.sample_id)));
            }
            if !s.filled.is_fully_finite() {
                return Err(Error::InvalidInput(format!(
                    "sample {} has missing heights",
                    s.sample_id
                )));
            }
            s.labels.check_dims(s.filled.width(), s.filled.height())?;
        }
        Ok(Corpus { samples })
    }

    pub fn plan(&self, kind: FoldKind, seed: u64) -> Result<FoldPlan> {
        let ids: Vec<(String, String)> = self
            .samples
            .iter()
            .map(|s| (s.sample_id.clone(), s.papyrus_id.clone()))
            .collect();
        plan_from_ids(&ids, kind, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub seed: u64,
    pub hyper: TrainHyper,
    /// Scales requested; coarse grids keep only those whose kernel fits.
    pub features: FeatureConfig,
    pub inpaint_radius: usize,
    /// Bin width for the z-binned regime; `None` uses the pitch.
    pub zbin_delta_um: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            hyper: TrainHyper::default(),
            features: FeatureConfig::default(),
            inpaint_radius: DEFAULT_INPAINT_RADIUS,
            zbin_delta_um: None,
        }
    }
}

const TAG_FOLDS_LOPO: u64 = 1;
const TAG_MODEL: u64 = 2;
const TAG_PIXELS: u64 = 3;
const TAG_AUGMENT: u64 = 4;

/// Fixed-offset seed fan-out, mixed with splitmix64 so neighbouring
/// inputs give unrelated streams.
pub fn derive_seed(base: u64, tag: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(a.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(b.wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
enum Input {
    Matched,
    Zbin(f64),
    CrossRes,
}

fn prepare(s: &CorpusSample, n: usize, input: Input) -> Result<(NormalizedImage, LabelMask)> {
    match input {
        Input::Matched | Input::Zbin(_) => {
            let mut h = block_downsample(&s.filled, n)?;
            if let Input::Zbin(delta) = input {
                h = zbin(&h, delta)?;
            }
            Ok((normalize_u16(&h)?, block_downsample_labels(&s.labels, n)?))
        }
        Input::CrossRes => {
            let h = degrade_roundtrip(&s.filled, n)?;
            let (w, hh) = cropped_dims(s.filled.width(), s.filled.height(), n);
            Ok((normalize_u16(&h)?, crop_labels(&s.labels, w, hh)?))
        }
    }
}

/// Model trained on one fold's training samples.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub fold: usize,
    pub model_id: String,
    pub train_ids: BTreeSet<String>,
    pub model: SegmenterModel,
}

fn feature_config_for(corpus: &Corpus, n: usize, base: &FeatureConfig) -> Result<FeatureConfig> {
    let (w, h) = corpus
        .samples
        .iter()
        .map(|s| cropped_dims(s.filled.width(), s.filled.height(), n))
        .fold((usize::MAX, usize::MAX), |(a, b), (w, h)| (a.min(w), b.min(h)));
    base.fitting(w / n, h / n).ok_or_else(|| {
        Error::InvalidInput(format!(
            "at kernel {n} the {}x{} grid is too small for any feature scale",
            w / n,
            h / n
        ))
    })
}

/// Training pixels for every sample at kernel `n`, independent of folds.
fn pixel_sets(corpus: &Corpus, n: usize, config: &FeatureConfig, cfg: &EvalConfig) -> Result<Vec<Vec<PixelSet>>> {
    corpus
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (img, labels) = prepare(s, n, Input::Matched)?;
            let count = cfg.hyper.pixels_per_sample;
            let f = extract_features_with(&img, config)?;
            let mut sets = vec![sample_pixels(&f, &labels, count, derive_seed(cfg.seed, TAG_PIXELS, i as u64, n as u64))?];
            drop(f);
            if cfg.hyper.augment {
                let (ai, al) = augment(&img, &labels, derive_seed(cfg.seed, TAG_AUGMENT, i as u64, n as u64));
                let f = extract_features_with(&ai, config)?;
                sets.push(sample_pixels(&f, &al, count, derive_seed(cfg.seed, TAG_PIXELS, i as u64, (n as u64) | (1 << 32)))?);
            }
            Ok(sets)
        })
        .collect()
}

fn train_folds(
    corpus: &Corpus,
    plan: &FoldPlan,
    sets: &[Vec<PixelSet>],
    config: &FeatureConfig,
    n: usize,
    prefix: &str,
    cfg: &EvalConfig,
) -> Result<Vec<FoldModel>> {
    let pitch = scaled_pitch_of(corpus, n);
    (0..plan.n_folds)
        .into_par_iter()
        .map(|fold| {
            let mut train_ids = BTreeSet::new();
            let mut refs = Vec::new();
            for (s, ss) in corpus.samples.iter().zip(sets) {
                if plan.fold_of(&s.sample_id) != Some(fold) {
                    train_ids.insert(s.sample_id.clone());
                    refs.extend(ss.iter());
                }
            }
            let hyper = TrainHyper {
                seed: derive_seed(cfg.seed, TAG_MODEL, fold as u64, n as u64),
                ..cfg.hyper.clone()
            };
            let model_id = format!("{prefix}_k{n}_f{fold}");
            let model = train_on_pixels(&refs, config, pitch, &hyper)
                .map_err(|e| Error::Training(format!("{model_id}: {e}")))?;
            Ok(FoldModel {
                fold,
                model_id,
                train_ids,
                model,
            })
        })
        .collect()
}

fn scaled_pitch_of(corpus: &Corpus, n: usize) -> f64 {
    crate::resample::scaled_pitch(corpus.samples[0].filled.pitch_um(), n)
}

/// Scores every sample with the model of the fold that holds it out.
fn score(
    corpus: &Corpus,
    plan: &FoldPlan,
    models: &[FoldModel],
    n: usize,
    input: Input,
    regime: Regime,
) -> Result<Vec<ResultRow>> {
    let pitch = scaled_pitch_of(corpus, n);
    corpus
        .samples
        .par_iter()
        .map(|s| {
            let fold = plan
                .fold_of(&s.sample_id)
                .ok_or_else(|| Error::InvalidInput(format!("sample {} not in fold plan", s.sample_id)))?;
            let fm = &models[fold];
            if fm.train_ids.contains(&s.sample_id) {
                return Err(Error::InvalidInput(format!(
                    "leakage: {} scored by a model trained on it",
                    s.sample_id
                )));
            }
            let (img, labels) = prepare(s, n, input)?;
            let f = extract_features_with(&img, &fm.model.config)?;
            let pred = fm.model.predict_features(&f)?;
            Ok(ResultRow {
                sample_id: s.sample_id.clone(),
                papyrus_id: s.papyrus_id.clone(),
                regime,
                pitch_um: pitch,
                dice: dice(&pred.ink, &labels.ink)?,
                fold,
                model_id: fm.model_id.clone(),
            })
        })
        .collect()
}

/// Runs the requested regimes, sharing fold models between them: z-binned
/// inputs are scored by the matched models of the same pitch, and the
/// cross-resolution regime uses the native matched models.
pub fn run_regimes(
    corpus: &Corpus,
    ladder: &PitchLadder,
    regimes: &[Regime],
    cfg: &EvalConfig,
) -> Result<BTreeMap<Regime, ResultTable>> {
    let want = |r: Regime| regimes.contains(&r);
    let mut out: BTreeMap<Regime, ResultTable> = regimes.iter().map(|&r| (r, ResultTable::default())).collect();
    let grid_regimes = want(Regime::Matched) || want(Regime::Zbin);
    let native_needed = want(Regime::CrossRes) || want(Regime::Lopo);

    let cv = if grid_regimes || want(Regime::CrossRes) {
        Some(corpus.plan(FoldKind::Cv5, cfg.seed)?)
    } else {
        None
    };

    let mut kernels: Vec<usize> = Vec::new();
    if native_needed {
        kernels.push(1);
    }
    if grid_regimes {
        for (n, _) in ladder.iter() {
            if !kernels.contains(&n) {
                kernels.push(n);
            }
        }
    }

    let mut native: Option<(FeatureConfig, Vec<Vec<PixelSet>>)> = None;
    let mut native_models: Option<Vec<FoldModel>> = None;
    for &n in &kernels {
        let config = feature_config_for(corpus, n, &cfg.features)?;
        let sets = pixel_sets(corpus, n, &config, cfg)?;
        let in_ladder = ladder.kernels.contains(&n);
        if let Some(plan) = &cv {
            if grid_regimes && in_ladder || n == 1 && want(Regime::CrossRes) {
                let models = train_folds(corpus, plan, &sets, &config, n, "cv", cfg)?;
                if in_ladder && want(Regime::Matched) {
                    let rows = score(corpus, plan, &models, n, Input::Matched, Regime::Matched)?;
                    if let Some(t) = out.get_mut(&Regime::Matched) {
                        t.rows.extend(rows);
                    }
                }
                if in_ladder && want(Regime::Zbin) {
                    let delta = cfg.zbin_delta_um.unwrap_or_else(|| scaled_pitch_of(corpus, n));
                    let rows = score(corpus, plan, &models, n, Input::Zbin(delta), Regime::Zbin)?;
                    if let Some(t) = out.get_mut(&Regime::Zbin) {
                        t.rows.extend(rows);
                    }
                }
                if n == 1 {
                    native_models = Some(models);
                }
            }
        }
        if n == 1 {
            native = Some((config, sets));
        }
    }

    if want(Regime::CrossRes) {
        let (plan, models) = (cv.as_ref(), native_models.as_ref());
        if let (Some(plan), Some(models)) = (plan, models) {
            let mut rows = Vec::new();
            for (n, _) in ladder.iter() {
                rows.extend(score(corpus, plan, models, n, Input::CrossRes, Regime::CrossRes)?);
            }
            if let Some(t) = out.get_mut(&Regime::CrossRes) {
                t.rows.extend(rows);
            }
        }
    }

    if want(Regime::Lopo) {
        let plan = corpus.plan(FoldKind::Lopo, derive_seed(cfg.seed, TAG_FOLDS_LOPO, 0, 0))?;
        let (config, sets) = native
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("native pixel sets unavailable".into()))?;
        let models = train_folds(corpus, &plan, sets, config, 1, "lopo", cfg)?;
        let rows = score(corpus, &plan, &models, 1, Input::Matched, Regime::Lopo)?;
        if let Some(t) = out.get_mut(&Regime::Lopo) {
            t.rows.extend(rows);
        }
    }
    Ok(out)
}

fn run_single(manifest: &DatasetManifest, ladder: &PitchLadder, regime: Regime, cfg: &EvalConfig) -> Result<ResultTable> {
    let corpus = Corpus::load(manifest, cfg.inpaint_radius)?;
    let mut tables = run_regimes(&corpus, ladder, &[regime], cfg)?;
    Ok(tables.remove(&regime).unwrap_or_default())
}

pub fn run_matched(manifest: &DatasetManifest, ladder: &PitchLadder, cfg: &EvalConfig) -> Result<ResultTable> {
    run_single(manifest, ladder, Regime::Matched, cfg)
}

pub fn run_cross_res(manifest: &DatasetManifest, ladder: &PitchLadder, cfg: &EvalConfig) -> Result<ResultTable> {
    run_single(manifest, ladder, Regime::CrossRes, cfg)
}

pub fn run_zbin(manifest: &DatasetManifest, ladder: &PitchLadder, cfg: &EvalConfig) -> Result<ResultTable> {
    run_single(manifest, ladder, Regime::Zbin, cfg)
}

pub fn run_lopo(manifest: &DatasetManifest, cfg: &EvalConfig) -> Result<ResultTable> {
    let native = PitchLadder::new(manifest_pitch(manifest)?, &[1])?;
    run_single(manifest, &native, Regime::Lopo, cfg)
}

fn manifest_pitch(manifest: &DatasetManifest) -> Result<f64> {
    let first = manifest
        .entries
        .first()
        .ok_or_else(|| Error::Manifest("manifest has no entries".into()))?;
    Ok(read_heightmap(&first.heightmap_path)?.pitch_um())
}

/// Median Dice per papyrus, in first-appearance order.
pub fn per_papyrus_medians(table: &ResultTable) -> Result<Vec<(String, f64)>> {
    let mut order: Vec<&str> = Vec::new();
    for r in &table.rows {
        if !order.contains(&r.papyrus_id.as_str()) {
            order.push(&r.papyrus_id);
        }
    }
    order
        .into_iter()
        .map(|p| {
            let d: Vec<f64> = table.rows.iter().filter(|r| r.papyrus_id == p).map(|r| r.dice).collect();
            Ok((p.to_string(), summarize(&d)?.median))
        })
        .collect()
}
