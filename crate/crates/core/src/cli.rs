//! Command-line driver: flat `key = value` run configuration and the
//! `synth`, `run`, `stats` and `report` stages.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{per_papyrus_medians, run_regimes, Corpus, EvalConfig, Regime, ResultTable};
use crate::hmap_io::{read_heightmap, read_manifest, read_mask};
use crate::preprocess::missingness_stats;
use crate::report::{box_plot_svg, summary_csv, summary_markdown, summary_rows};
use crate::resample::{PitchLadder, DEFAULT_KERNELS, NATIVE_PITCH_UM};
use crate::segment::{FeatureConfig, TrainHyper, DEFAULT_SCALES_PX};
use crate::stats::{
    friedman, pages_l, pairwise_wilcoxon, summarize, wilcoxon_signed_rank, PairwiseContrast,
    Summary, TestReport, DEFAULT_PERMUTATIONS,
};
use crate::synth::{default_papyri, generate_corpus, SynthConfig};

pub const CONFIG_ECHO: &str = "config.txt";
pub const EFFECTIVE_CONFIG: &str = "effective_config.txt";
pub const THREADS_ENV: &str = "RELIEFSCAN_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Verbatim text of the config file, if one was read.
    pub source: Option<String>,
    pub out_dir: PathBuf,
    /// Where `synth` writes the corpus; defaults to `<out_dir>/corpus`.
    pub corpus_dir: Option<PathBuf>,
    /// Defaults to `<corpus_dir>/manifest.csv`.
    pub manifest: Option<PathBuf>,
    pub seed: u64,
    pub kernels: Vec<usize>,
    pub regimes: Vec<Regime>,
    pub n_perm: usize,
    pub hyper: TrainHyper,
    pub scales_px: Vec<usize>,
    pub inpaint_radius: usize,
    pub zbin_delta_um: Option<f64>,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: None,
            out_dir: PathBuf::from("out"),
            corpus_dir: None,
            manifest: None,
            seed: 0,
            kernels: DEFAULT_KERNELS.to_vec(),
            regimes: Regime::ALL.to_vec(),
            n_perm: DEFAULT_PERMUTATIONS,
            hyper: TrainHyper::default(),
            scales_px: DEFAULT_SCALES_PX.to_vec(),
            inpaint_radius: crate::preprocess::DEFAULT_INPAINT_RADIUS,
            zbin_delta_um: None,
            synth: SynthConfig::default(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse list item '{s}'")))
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

impl RunConfig {
    /// Applies one `key = value` setting. Relative paths resolve against
    /// `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let v = value.trim();
        let path = || base.join(v);
        match key.trim() {
            "out_dir" => self.out_dir = path(),
            "corpus_dir" => self.corpus_dir = Some(path()),
            "manifest" => self.manifest = Some(path()),
            "seed" => self.seed = parse_value(key, v)?,
            "ladder" => self.kernels = parse_list(key, v)?,
            "regimes" => self.regimes = parse_list(key, v)?,
            "n_perm" => self.n_perm = parse_value(key, v)?,
            "lr" => self.hyper.lr = parse_value(key, v)?,
            "epochs" => self.hyper.epochs = parse_value(key, v)?,
            "batch" => self.hyper.batch = parse_value(key, v)?,
            "patience" => self.hyper.patience = parse_value(key, v)?,
            "pixels_per_sample" => self.hyper.pixels_per_sample = parse_value(key, v)?,
            "val_frac" => self.hyper.val_frac = parse_value(key, v)?,
            "augment" => self.hyper.augment = parse_value(key, v)?,
            "scales" => self.scales_px = parse_list(key, v)?,
            "inpaint_radius" => self.inpaint_radius = parse_value(key, v)?,
            "zbin_delta_um" => self.zbin_delta_um = Some(parse_value(key, v)?),
            "synth.width" => self.synth.width = parse_value(key, v)?,
            "synth.height" => self.synth.height = parse_value(key, v)?,
            "synth.pitch_um" => self.synth.pitch_um = parse_value(key, v)?,
            "synth.fiber_period_um" => self.synth.fiber_period_um = parse_value(key, v)?,
            "synth.fiber_amp_um" => self.synth.fiber_amp_um = parse_value(key, v)?,
            "synth.tilt_um_per_mm" => self.synth.tilt_um_per_mm = parse_value(key, v)?,
            "synth.curvature_um_per_mm2" => self.synth.curvature_um_per_mm2 = parse_value(key, v)?,
            "synth.roughness_rms_um" => self.synth.roughness_rms_um = parse_value(key, v)?,
            "synth.ink_depression_um" => self.synth.ink_depression_um = parse_value(key, v)?,
            "synth.ink_smoothing_factor" => self.synth.ink_smoothing_factor = parse_value(key, v)?,
            "synth.stroke_width_um" => self.synth.stroke_width_um = parse_value(key, v)?,
            "synth.dropout_frac" => self.synth.dropout_frac = parse_value(key, v)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig {
            source: Some(text.to_string()),
            ..RunConfig::default()
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got '{line}'", i + 1))
            })?;
            cfg.set(k, v, base)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        PitchLadder::new(NATIVE_PITCH_UM, &self.kernels)?;
        if self.regimes.is_empty() {
            return Err(Error::Config("no regimes selected".into()));
        }
        if self.scales_px.is_empty() || self.scales_px.contains(&0) {
            return Err(Error::Config("scales must be positive".into()));
        }
        if self.n_perm == 0 {
            return Err(Error::Config("n_perm must be >= 1".into()));
        }
        if !(self.hyper.lr > 0.0 && self.hyper.lr.is_finite()) {
            return Err(Error::Config("lr must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.hyper.val_frac) {
            return Err(Error::Config("val_frac must be in [0, 1)".into()));
        }
        if self.hyper.epochs == 0 || self.hyper.batch == 0 || self.hyper.pixels_per_sample == 0 {
            return Err(Error::Config("epochs, batch and pixels_per_sample must be >= 1".into()));
        }
        self.synth.validate()
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("corpus"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.corpus_dir().join("manifest.csv"))
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            seed: self.seed,
            hyper: TrainHyper {
                seed: self.seed,
                ..self.hyper.clone()
            },
            features: FeatureConfig {
                scales_px: self.scales_px.clone(),
            },
            inpaint_radius: self.inpaint_radius,
            zbin_delta_um: self.zbin_delta_um,
        }
    }

    /// Every setting in `key = value` form, enough to reproduce a run.
    pub fn effective(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let s = &self.synth;
        let regimes: Vec<&str> = self.regimes.iter().map(|r| r.as_str()).collect();
        let mut lines = vec![
            format!("out_dir = {}", self.out_dir.display()),
            format!("corpus_dir = {}", self.corpus_dir().display()),
            format!("manifest = {}", self.manifest_path().display()),
            format!("seed = {}", self.seed),
            format!("ladder = {}", join(&self.kernels)),
            format!("regimes = {}", regimes.join(",")),
            format!("n_perm = {}", self.n_perm),
            format!("lr = {}", self.hyper.lr),
            format!("epochs = {}", self.hyper.epochs),
            format!("batch = {}", self.hyper.batch),
            format!("patience = {}", self.hyper.patience),
            format!("pixels_per_sample = {}", self.hyper.pixels_per_sample),
            format!("val_frac = {}", self.hyper.val_frac),
            format!("augment = {}", self.hyper.augment),
            format!("scales = {}", join(&self.scales_px)),
            format!("inpaint_radius = {}", self.inpaint_radius),
        ];
        if let Some(d) = self.zbin_delta_um {
            lines.push(format!("zbin_delta_um = {d}"));
        }
        lines.extend([
            format!("synth.width = {}", s.width),
            format!("synth.height = {}", s.height),
            format!("synth.pitch_um = {}", s.pitch_um),
            format!("synth.fiber_period_um = {}", s.fiber_period_um),
            format!("synth.fiber_amp_um = {}", s.fiber_amp_um),
            format!("synth.tilt_um_per_mm = {}", s.tilt_um_per_mm),
            format!("synth.curvature_um_per_mm2 = {}", s.curvature_um_per_mm2),
            format!("synth.roughness_rms_um = {}", s.roughness_rms_um),
            format!("synth.ink_depression_um = {}", s.ink_depression_um),
            format!("synth.ink_smoothing_factor = {}", s.ink_smoothing_factor),
            format!("synth.stroke_width_um = {}", s.stroke_width_um),
            format!("synth.dropout_frac = {}", s.dropout_frac),
        ]);
        lines.join("\n") + "\n"
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: PathBuf, bytes: impl AsRef<[u8]>, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn echo_config(cfg: &RunConfig, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(src) = &cfg.source {
        write_file(dir.join(CONFIG_ECHO), src, written)?;
    }
    write_file(dir.join(EFFECTIVE_CONFIG), cfg.effective(), written)
}

pub fn results_path(dir: &Path, regime: Regime) -> PathBuf {
    dir.join(format!("results_{}.csv", regime.as_str()))
}

/// Generates the default three-papyrus corpus into the corpus directory.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.corpus_dir();
    create_dir(&dir)?;
    let base = SynthConfig {
        seed: cfg.seed,
        ..cfg.synth.clone()
    };
    let manifest = generate_corpus(&base, &default_papyri(), &dir)?;
    let mut written = Vec::new();
    for e in &manifest.entries {
        written.push(e.heightmap_path.clone());
        written.push(e.label_path.clone());
    }
    written.push(dir.join("manifest.csv"));
    echo_config(cfg, &dir, &mut written)?;
    println!(
        "corpus: {} samples from {} papyri ({})",
        manifest.len(),
        manifest.papyri().len(),
        manifest.papyri().join(", ")
    );
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
struct MissingnessRow {
    sample_id: String,
    papyrus_id: String,
    frac_total: f64,
    frac_ink: f64,
    frac_papyrus: f64,
    dice_missing_vs_ink: f64,
}

/// Runs the selected regimes and writes `results_<regime>.csv` plus the
/// per-sample missingness controls.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let manifest_path = cfg.manifest_path();
    let manifest = read_manifest(&manifest_path)?;
    create_dir(&cfg.out_dir)?;
    let mut written = Vec::new();
    echo_config(cfg, &cfg.out_dir, &mut written)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &manifest.entries {
        let raw = read_heightmap(&e.heightmap_path)?;
        let labels = read_mask(&e.label_path)?;
        let m = missingness_stats(&raw, &labels)?;
        w.serialize(MissingnessRow {
            sample_id: e.sample_id.clone(),
            papyrus_id: e.papyrus_id.clone(),
            frac_total: m.frac_total,
            frac_ink: m.frac_ink,
            frac_papyrus: m.frac_papyrus,
            dice_missing_vs_ink: m.dice_missing_vs_ink,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv flush: {e}")))?;
    write_file(cfg.out_dir.join("missingness.csv"), bytes, &mut written)?;

    let pitch = read_heightmap(&manifest.entries[0].heightmap_path)?.pitch_um();
    let ladder = PitchLadder::new(pitch, &cfg.kernels)?;
    let corpus = Corpus::load(&manifest, cfg.inpaint_radius)?;
    let tables = run_regimes(&corpus, &ladder, &cfg.regimes, &cfg.eval_config())?;
    for (regime, table) in &tables {
        let path = results_path(&cfg.out_dir, *regime);
        table.write_csv(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeStats {
    pub regime: Regime,
    pub summaries: Vec<(f64, Summary)>,
    pub friedman: Option<TestReport>,
    pub page: Option<TestReport>,
    pub pairwise: Vec<PairwiseContrast>,
    pub per_papyrus_median: Vec<(String, f64)>,
    pub notices: Vec<String>,
}

/// Friedman, Page's L for a decline with pitch, Holm-adjusted pairwise
/// Wilcoxon tests and per-pitch summaries for one regime's results.
pub fn regime_stats(regime: Regime, table: &ResultTable, n_perm: usize, seed: u64) -> Result<RegimeStats> {
    let mut out = RegimeStats {
        regime,
        summaries: Vec::new(),
        friedman: None,
        page: None,
        pairwise: Vec::new(),
        per_papyrus_median: per_papyrus_medians(table)?,
        notices: Vec::new(),
    };
    for p in table.pitches() {
        out.summaries.push((p, summarize(&table.dice_at(p))?));
    }
    if table.pitches().len() >= 2 {
        let m = table.paired()?;
        match friedman(&m) {
            Ok(r) => out.friedman = Some(r),
            Err(Error::DegenerateStatistic(msg)) => out.notices.push(format!("friedman: {msg}")),
            Err(e) => return Err(e),
        }
        // increasing Dice is expected towards the finest pitch
        let order: Vec<String> = m.conditions().iter().rev().cloned().collect();
        out.page = Some(pages_l(&m, &order, n_perm, seed)?);
        out.pairwise = pairwise_wilcoxon(&m)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct MissingnessControl {
    n: usize,
    median_frac_total: f64,
    median_frac_ink: f64,
    median_frac_papyrus: f64,
    median_dice_missing_vs_ink: f64,
    wilcoxon: Option<TestReport>,
    notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
struct MissingnessIn {
    frac_total: f64,
    frac_ink: f64,
    frac_papyrus: f64,
    dice_missing_vs_ink: f64,
}

fn missingness_control(path: &Path) -> Result<MissingnessControl> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<MissingnessIn> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    let col = |f: fn(&MissingnessIn) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (ink, pap) = (col(|m| m.frac_ink), col(|m| m.frac_papyrus));
    let (wilcoxon, notice) = match wilcoxon_signed_rank(&ink, &pap) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(MissingnessControl {
        n: rows.len(),
        median_frac_total: summarize(&col(|m| m.frac_total))?.median,
        median_frac_ink: summarize(&ink)?.median,
        median_frac_papyrus: summarize(&pap)?.median,
        median_dice_missing_vs_ink: summarize(&col(|m| m.dice_missing_vs_ink))?.median,
        wilcoxon,
        notice,
    })
}

fn read_results(cfg: &RunConfig) -> Result<Vec<(Regime, ResultTable)>> {
    cfg.regimes
        .iter()
        .map(|&r| {
            let path = results_path(&cfg.out_dir, r);
            ResultTable::read_csv(&path)
                .map(|t| (r, t))
                .map_err(|e| Error::Config(format!("expected results at {}: {e}", path.display())))
        })
        .collect()
}

/// Writes `stats.json` and `stats_pairwise.csv` from the result CSVs.
pub fn cmd_stats(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let tables = read_results(cfg)?;
    let mut all = Vec::new();
    let mut pair_csv = csv::Writer::from_writer(Vec::new());
    pair_csv.write_record(["regime", "a_um", "b_um", "w", "p_value", "p_holm", "median_diff", "method"])?;
    for (regime, table) in &tables {
        let s = regime_stats(*regime, table, cfg.n_perm, cfg.seed)?;
        for n in &s.notices {
            println!("{regime}: {n}");
        }
        for c in &s.pairwise {
            pair_csv.write_record([
                regime.as_str().to_string(),
                c.a.clone(),
                c.b.clone(),
                c.w.to_string(),
                c.p_value.to_string(),
                c.p_holm.to_string(),
                c.median_diff.to_string(),
                c.method.clone(),
            ])?;
        }
        all.push(s);
    }
    let missing_path = cfg.out_dir.join("missingness.csv");
    let control = if missing_path.exists() {
        Some(missingness_control(&missing_path)?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct StatsFile<'a> {
        regimes: &'a [RegimeStats],
        missingness: Option<MissingnessControl>,
    }
    let json = serde_json::to_string_pretty(&StatsFile {
        regimes: &all,
        missingness: control,
    })?;
    let mut written = Vec::new();
    write_file(cfg.out_dir.join("stats.json"), json + "\n", &mut written)?;
    let bytes = pair_csv
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv flush: {e}")))?;
    write_file(cfg.out_dir.join("stats_pairwise.csv"), bytes, &mut written)?;
    Ok(written)
}

/// Writes the box plot (`fig_dice_vs_pitch.svg`) of matched vs
/// cross-resolution results, plus `summary.md` and `summary.csv`.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let stats = cfg.out_dir.join("stats.json");
    if !stats.exists() {
        return Err(Error::Config(format!(
            "expected stats output at {}; run `stats` first",
            stats.display()
        )));
    }
    let tables = read_results(cfg)?;
    let refs: Vec<(Regime, &ResultTable)> = tables.iter().map(|(r, t)| (*r, t)).collect();
    let plotted: Vec<(Regime, &ResultTable)> = refs
        .iter()
        .copied()
        .filter(|(r, _)| matches!(r, Regime::Matched | Regime::CrossRes))
        .collect();
    let mut written = Vec::new();
    if !plotted.is_empty() {
        write_file(cfg.out_dir.join("fig_dice_vs_pitch.svg"), box_plot_svg(&plotted)?, &mut written)?;
    }
    let rows = summary_rows(&refs)?;
    let mut md = String::from("# Dice by pixel size\n\n");
    md.push_str(&summary_markdown(&rows));
    for (regime, table) in &tables {
        if *regime == Regime::Lopo {
            md.push_str("\n## Leave one papyrus out\n\n| Papyrus | n | median [Q1, Q3] | mean ± s.d. |\n|---|---|---|---|\n");
            for (p, _) in per_papyrus_medians(table)? {
                let d: Vec<f64> = table.rows.iter().filter(|r| r.papyrus_id == p).map(|r| r.dice).collect();
                let s = summarize(&d)?;
                md.push_str(&format!(
                    "| {p} | {} | {:.3} [{:.3}, {:.3}] | {:.3} ± {:.3} |\n",
                    s.n, s.median, s.q1, s.q3, s.mean, s.sd
                ));
            }
        }
    }
    write_file(cfg.out_dir.join("summary.md"), md, &mut written)?;
    write_file(cfg.out_dir.join("summary.csv"), summary_csv(&rows)?, &mut written)?;
    Ok(written)
}

#[derive(Debug, Parser)]
#[command(name = "reliefscan", version, about = "Ink segmentation from surface topography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated regimes: matched, cross_res, zbin, lopo.
    #[arg(long)]
    pub regimes: Option<String>,
    /// Comma-separated block sizes, e.g. 1,2,4.
    #[arg(long)]
    pub ladder: Option<String>,
    /// Manifest to run on instead of the generated corpus.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus.
    Synth(CommonArgs),
    /// Run the experimental regimes.
    Run(CommonArgs),
    /// Nonparametric statistics over the result tables.
    Stats(CommonArgs),
    /// Box plot and summary tables.
    Report(CommonArgs),
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let cwd = Path::new(".");
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(r) = &self.regimes {
            cfg.set("regimes", r, cwd)?;
        }
        if let Some(l) = &self.ladder {
            cfg.set("ladder", l, cwd)?;
        }
        if let Some(m) = &self.manifest {
            cfg.manifest = Some(m.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Caps the rayon pool at `RELIEFSCAN_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be an integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    init_threads()?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(&a.resolve()?),
        Command::Run(a) => cmd_run(&a.resolve()?),
        Command::Stats(a) => cmd_stats(&a.resolve()?),
        Command::Report(a) => cmd_report(&a.resolve()?),
    }
}
