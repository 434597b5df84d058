use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use reliefscan::cli::{cmd_report, cmd_run, cmd_stats, cmd_synth, results_path, RunConfig};
use reliefscan::eval::{dice, per_papyrus_medians, Regime, ResultTable};
use reliefscan::hmap_io::HeightMap;
use reliefscan::preprocess::{inpaint_missing, missingness_stats, NormalizedImage};
use reliefscan::resample::{
    bilinear_upsample, block_downsample, cropped_dims, zbin, zbin_value, PitchLadder,
};
use reliefscan::segment::{composite_loss, extract_features_with, FeatureConfig};
use reliefscan::stats::{
    friedman, holm_adjust, pages_l, wilcoxon_signed_rank, PairedMatrix,
};
use reliefscan::synth::{corpus_configs, default_papyri, generate_sample, SynthConfig};

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn dice_oracle(a: &[bool], b: &[bool]) -> f64 {
    let sa: BTreeSet<usize> = (0..a.len()).filter(|&i| a[i]).collect();
    let sb: BTreeSet<usize> = (0..b.len()).filter(|&i| b[i]).collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    2.0 * sa.intersection(&sb).count() as f64 / (sa.len() + sb.len()) as f64
}

fn c1_dice() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..500 {
        let pa: f64 = rng.random_range(0.0..1.0);
        let pb: f64 = rng.random_range(0.0..1.0);
        let a: Vec<bool> = (0..1024).map(|_| rng.random_bool(pa)).collect();
        let b: Vec<bool> = (0..1024).map(|_| rng.random_bool(pb)).collect();
        let got = dice(&a, &b).map_err(e2s)?;
        ensure(got == dice_oracle(&a, &b), || format!("pair {i}: {got} vs oracle"))?;
    }
    let empty = vec![false; 1024];
    let both = dice(&empty, &empty).map_err(e2s)?;
    ensure(both == 1.0, || format!("both-empty gave {both}"))?;
    Ok("500 pairs exact, both-empty = 1".into())
}

fn c2_inpaint() -> Outcome {
    let (w, h) = (64, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..100 {
        let frac: f64 = rng.random_range(0.01..0.05);
        let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let mut z: Vec<f64> = (0..w * h)
            .map(|i| {
                let (r, col) = ((i / w) as f64, (i % w) as f64);
                10.0 * a * (r / 9.0).sin() + 5.0 * b * (col / 7.0).cos() + c * rng.random::<f64>()
            })
            .collect();
        let dropped = (frac * (w * h) as f64).round() as usize;
        for i in rand::seq::index::sample(&mut rng, w * h, dropped) {
            z[i] = f64::NAN;
        }
        let map = HeightMap::new(w, h, 0.34, z.clone()).map_err(e2s)?;
        let out = inpaint_missing(&map, 3).map_err(e2s)?;
        for (i, (&orig, &got)) in z.iter().zip(out.values()).enumerate() {
            ensure(got.is_finite(), || format!("map {k}: pixel {i} left unfilled"))?;
            if orig.is_finite() {
                ensure(orig.to_bits() == got.to_bits(), || {
                    format!("map {k}: pixel {i} changed {orig} -> {got}")
                })?;
            }
        }

        let level = rng.random_range(-50.0..50.0);
        let mut flat = vec![level; w * h];
        for i in rand::seq::index::sample(&mut rng, w * h, dropped) {
            flat[i] = f64::NAN;
        }
        let filled = inpaint_missing(&HeightMap::new(w, h, 0.34, flat).map_err(e2s)?, 3).map_err(e2s)?;
        ensure(filled.values().iter().all(|&v| v == level), || {
            format!("constant map {k} at {level} not filled exactly")
        })?;
    }
    Ok("100 maps bit-identical on finite pixels, constants exact".into())
}

fn c3_resample() -> Outcome {
    let m = HeightMap::new(2, 2, 0.34, vec![1.0, 2.0, 3.0, 4.0]).map_err(e2s)?;
    let d = block_downsample(&m, 2).map_err(e2s)?;
    ensure(d.values() == [2.5] && d.pitch_um() == 0.68, || format!("block mean {:?}", d.values()))?;

    let expected = [0.34, 0.68, 1.02, 1.36, 2.04, 2.72, 3.40, 5.44, 10.88];
    let ladder = PitchLadder::default();
    ensure(ladder.pitches_um == expected, || format!("ladder {:?}", ladder.pitches_um))?;

    let (w, h) = (131, 97);
    let plane: Vec<f64> = (0..w * h)
        .map(|i| 0.37 * (i % w) as f64 - 1.3 * (i / w) as f64 + 5.0)
        .collect();
    let plane = HeightMap::new(w, h, 0.34, plane).map_err(e2s)?;
    let mut worst: f64 = 0.0;
    for n in [2usize, 3, 4, 6, 8, 10, 16, 32] {
        let (cw, ch) = cropped_dims(w, h, n);
        let up = bilinear_upsample(&block_downsample(&plane, n).map_err(e2s)?, cw, ch, 0.34).map_err(e2s)?;
        // beyond the outermost block centres the interpolant clamps
        let lo = n / 2 + 1;
        for r in lo..ch - lo {
            for c in lo..cw - lo {
                worst = worst.max((up.get(r, c) - plane.get(r, c)).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("plane round-trip error {worst:e}"))?;

    let zb = zbin_value(7.1, 3.40);
    ensure((zb - 8.5).abs() < 1e-12, || format!("zbin(7.1, 3.40) = {zb}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &delta in &expected {
        let z: Vec<f64> = (0..4096).map(|_| rng.random_range(-200.0..200.0)).collect();
        let hm = HeightMap::new(64, 64, delta, z.clone()).map_err(e2s)?;
        let q = zbin(&hm, delta).map_err(e2s)?;
        for (a, b) in z.iter().zip(q.values()) {
            ensure((a - b).abs() <= delta / 2.0 + 1e-12, || format!("|{b} - {a}| > {delta}/2"))?;
        }
        let again = zbin(&q, delta).map_err(e2s)?;
        ensure(again.values() == q.values(), || format!("zbin not idempotent at {delta}"))?;
    }
    Ok(format!("block mean 2.5, ladder exact, plane error {worst:.1e}, zbin bound holds"))
}

fn c4_stats() -> Outcome {
    let rows: Vec<Vec<f64>> = (0..10)
        .map(|i| (0..3).map(|j| (j as f64 + 1.0) * (1.0 + i as f64 * 0.1)).collect())
        .collect();
    let m = PairedMatrix::new(rows, vec!["a".into(), "b".into(), "c".into()]).map_err(e2s)?;
    let f = friedman(&m).map_err(e2s)?;
    ensure((f.statistic - 20.0).abs() <= 1e-9, || format!("friedman chi2 {}", f.statistic))?;
    let l = pages_l(&m, m.conditions(), 9999, 4).map_err(e2s)?;
    ensure(l.statistic == 140.0 && l.p_value == 1.0e-4, || {
        format!("page L {} p {}", l.statistic, l.p_value)
    })?;
    let w = wilcoxon_signed_rank(&[1.5, 2.5, 3.5, 4.5, 5.5], &[0.0; 5]).map_err(e2s)?;
    ensure(w.p_value == 0.0625, || format!("wilcoxon p {}", w.p_value))?;
    let h = holm_adjust(&[0.01, 0.04, 0.03]);
    ensure(h == [0.03, 0.06, 0.06], || format!("holm {h:?}"))?;
    Ok("chi2 20, L 140 p 1e-4, W p 0.0625, holm exact".into())
}

fn c5_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = FeatureConfig { scales_px: vec![1] };
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let u: Vec<u16> = (0..64).map(|_| rng.random()).collect();
        let img = NormalizedImage::from_u16(8, 8, 0.34, u).map_err(e2s)?;
        let fs = extract_features_with(&img, &config).map_err(e2s)?;
        let rows: Vec<Vec<f64>> = (0..64).map(|i| fs.row(i)).collect();
        let labels: Vec<bool> = (0..64).map(|_| rng.random_bool(0.4)).collect();
        let d = rows[0].len();
        let weights: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias = rng.random_range(-0.5..0.5);
        let (_, gw, gb) = composite_loss(&rows, &labels, &weights, bias);
        let eps = 1e-6;
        let loss = |w: &[f64], b: f64| composite_loss(&rows, &labels, w, b).0;
        let mut check = |analytic: f64, numeric: f64, what: &str| -> std::result::Result<(), String> {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
            ensure(rel <= 1e-4, || format!("instance {inst} {what}: {analytic} vs {numeric}"))
        };
        for j in 0..d {
            let (mut hi, mut lo) = (weights.clone(), weights.clone());
            hi[j] += eps;
            lo[j] -= eps;
            check(gw[j], (loss(&hi, bias) - loss(&lo, bias)) / (2.0 * eps), &format!("w{j}"))?;
        }
        let num_b = (loss(&weights, bias + eps) - loss(&weights, bias - eps)) / (2.0 * eps);
        check(gb, num_b, "bias")?;
    }
    Ok(format!("20 instances, worst relative error {worst:.1e}"))
}

struct Pipeline {
    dir: tempfile::TempDir,
}

fn run_pipeline() -> std::result::Result<Pipeline, String> {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let cfg = RunConfig {
        out_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    cmd_synth(&cfg).map_err(e2s)?;
    cmd_run(&cfg).map_err(e2s)?;
    cmd_stats(&cfg).map_err(e2s)?;
    cmd_report(&cfg).map_err(e2s)?;
    Ok(Pipeline { dir })
}

fn load(dir: &Path, regime: Regime) -> std::result::Result<ResultTable, String> {
    ResultTable::read_csv(results_path(dir, regime)).map_err(e2s)
}

fn medians(t: &ResultTable) -> std::result::Result<BTreeMap<String, f64>, String> {
    let m = t.medians().map_err(e2s)?;
    Ok(m.into_iter().map(|(p, v)| (p.to_string(), v)).collect())
}

fn c6_trend(p: &Pipeline, elapsed: Duration) -> Outcome {
    let dir = p.dir.path();
    let ladder = PitchLadder::default();
    let key = |n: usize| ladder.iter().find(|&(k, _)| k == n).map(|(_, p)| p.to_string()).unwrap();
    let matched = load(dir, Regime::Matched)?;
    let cross = load(dir, Regime::CrossRes)?;
    let zb = load(dir, Regime::Zbin)?;
    let (mm, cm, zm) = (medians(&matched)?, medians(&cross)?, medians(&zb)?);
    let native = key(1);
    let mut failures = Vec::new();

    let drop32 = mm[&native] - mm[&key(32)];
    if mm[&native] < 0.80 || drop32 < 0.25 {
        failures.push(format!("(a) matched native {:.3}, drop at n=32 {drop32:.3}", mm[&native]));
    }

    let m = matched.paired().map_err(e2s)?;
    let order: Vec<String> = m.conditions().iter().rev().cloned().collect();
    let page = pages_l(&m, &order, 9999, 0).map_err(e2s)?;
    if page.p_value > 0.01 {
        failures.push(format!("(b) page p {}", page.p_value));
    }

    let coarse: Vec<usize> = ladder.kernels.iter().copied().filter(|&n| n >= 10).collect();
    let worst_cross = coarse.iter().map(|&n| cm[&native] - cm[&key(n)]).fold(f64::INFINITY, f64::min);
    if worst_cross < 0.30 {
        failures.push(format!("(c) cross-res drop at n>=10 only {worst_cross:.3}"));
    }
    let steep: Vec<usize> = ladder.kernels.iter().copied().filter(|&n| n >= 8).collect();
    let mean_drop = |ms: &BTreeMap<String, f64>| {
        steep.iter().map(|&n| ms[&native] - ms[&key(n)]).sum::<f64>() / steep.len() as f64
    };
    let (cross_drop, matched_drop) = (mean_drop(&cm), mean_drop(&mm));
    if cross_drop <= matched_drop {
        failures.push(format!("(c) cross-res mean drop {cross_drop:.3} <= matched {matched_drop:.3}"));
    }

    let shift = mm
        .iter()
        .map(|(p, v)| (v - zm[p]).abs())
        .fold(0.0, f64::max);
    if shift > 0.08 {
        failures.push(format!("(d) max zbin median shift {shift:.3}"));
    }

    let row = |ms: &BTreeMap<String, f64>| {
        ladder.kernels.iter().map(|&n| format!("{:.3}", ms[&key(n)])).collect::<Vec<_>>().join(" ")
    };
    println!("    matched   {}", row(&mm));
    println!("    cross_res {}", row(&cm));
    println!("    zbin      {}", row(&zm));
    let seq: Vec<f64> = ladder.kernels.iter().map(|&n| mm[&key(n)]).collect();
    let inversions = seq.windows(2).filter(|w| w[1] >= w[0]).count();
    println!("    matched adjacent inversions along the ladder: {inversions}");
    if elapsed > Duration::from_secs(600) {
        failures.push(format!("full run took {:.0}s", elapsed.as_secs_f64()));
    }
    if failures.is_empty() {
        Ok(format!(
            "drop32 {drop32:.3}, page p {:.1e}, cross drop {cross_drop:.3} vs {matched_drop:.3}, zbin shift {shift:.3}",
            page.p_value
        ))
    } else {
        Err(failures.join("; "))
    }
}

fn c7_missingness() -> Outcome {
    let base = SynthConfig::default();
    let runs: Vec<std::result::Result<(f64, f64, f64), String>> = (0..20u64)
        .map(|seed| {
            let cfgs = corpus_configs(&SynthConfig { seed, ..base.clone() }, &default_papyri());
            let stats: Vec<_> = cfgs
                .par_iter()
                .map(|(_, _, c)| {
                    let s = generate_sample(c).map_err(e2s)?;
                    missingness_stats(&s.heightmap, &s.labels).map_err(e2s)
                })
                .collect::<std::result::Result<_, String>>()?;
            let frac_err = stats
                .iter()
                .map(|m| (m.frac_total - base.dropout_frac).abs())
                .fold(0.0, f64::max);
            let ink: Vec<f64> = stats.iter().map(|m| m.frac_ink).collect();
            let pap: Vec<f64> = stats.iter().map(|m| m.frac_papyrus).collect();
            let p = wilcoxon_signed_rank(&ink, &pap).map_err(e2s)?.p_value;
            let d = stats.iter().map(|m| m.dice_missing_vs_ink).fold(0.0, f64::max);
            Ok((frac_err, p, d))
        })
        .collect();
    let runs: Vec<(f64, f64, f64)> = runs.into_iter().collect::<std::result::Result<_, _>>()?;
    let frac_err = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    let non_sig = runs.iter().filter(|r| r.1 >= 0.05).count();
    let max_dice = runs.iter().map(|r| r.2).fold(0.0, f64::max);
    let msg = format!("max |frac - cfg| {frac_err:.4}, {non_sig}/20 non-significant, max Dice {max_dice:.3}");
    if frac_err <= 0.005 && non_sig >= 18 && max_dice < 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c8_lopo(p: &Pipeline) -> Outcome {
    let lopo = load(p.dir.path(), Regime::Lopo)?;
    let matched = load(p.dir.path(), Regime::Matched)?;
    let samples: BTreeSet<&str> = matched.rows.iter().map(|r| r.sample_id.as_str()).collect();
    let lopo_ids: Vec<&str> = lopo.rows.iter().map(|r| r.sample_id.as_str()).collect();
    let unique: BTreeSet<&str> = lopo_ids.iter().copied().collect();
    ensure(lopo_ids.len() == unique.len() && unique == samples, || {
        format!("{} lopo rows for {} samples", lopo_ids.len(), samples.len())
    })?;
    let meds = per_papyrus_medians(&lopo).map_err(e2s)?;
    // the papyrus with the weakest, least smoothed ink relief
    let shifted = default_papyri()
        .into_iter()
        .min_by(|a, b| a.ink_depression_scale.total_cmp(&b.ink_depression_scale))
        .map(|p| p.papyrus_id)
        .ok_or("empty default corpus")?;
    let lowest = meds
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(id, _)| id.clone())
        .unwrap_or_default();
    let desc = meds.iter().map(|(id, m)| format!("{id} {m:.3}")).collect::<Vec<_>>().join(", ");
    if lowest == shifted {
        Ok(format!("{desc}; one row per sample"))
    } else {
        Err(format!("lowest is {lowest}, expected {shifted}: {desc}"))
    }
}

fn c9_determinism(first: &Pipeline) -> Outcome {
    let second = run_pipeline()?;
    let mut names: Vec<String> = fs::read_dir(first.dir.path())
        .map_err(e2s)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") || n.ends_with(".svg") || n.ends_with(".json"))
        .collect();
    names.sort();
    ensure(names.iter().any(|n| n.ends_with(".svg")), || "no SVG written".into())?;
    for n in &names {
        let a = fs::read(first.dir.path().join(n)).map_err(e2s)?;
        let b = fs::read(second.dir.path().join(n)).map_err(|e| format!("{n}: {e}"))?;
        ensure(a == b, || format!("{n} differs between runs"))?;
    }
    Ok(format!("{} files byte-identical", names.len()))
}

fn report(id: usize, what: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = f();
    let dt = t.elapsed();
    let over = limit.is_some_and(|l| dt > l);
    let ok = out.is_ok() && !over;
    let detail = match (&out, over) {
        (Ok(m), false) => m.clone(),
        (Ok(m), true) => format!("{m}; exceeded {:?}", limit.unwrap()),
        (Err(e), _) => e.clone(),
    };
    println!(
        "{} criterion {id} ({what}) [{:.1}s]: {detail}",
        if ok { "PASS" } else { "FAIL" },
        dt.as_secs_f64()
    );
    ok
}

fn main() {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= report(1, "dice oracle", Some(secs(1)), c1_dice);
    ok &= report(2, "inpainting restoration", Some(secs(30)), c2_inpaint);
    ok &= report(3, "resampling kernels", None, c3_resample);
    ok &= report(4, "statistics oracles", Some(secs(10)), c4_stats);
    ok &= report(5, "loss gradient", Some(secs(10)), c5_gradient);

    let t = Instant::now();
    let pipeline = run_pipeline();
    let elapsed = t.elapsed();
    println!("    full pipeline on the default corpus: {:.1}s", elapsed.as_secs_f64());
    match &pipeline {
        Ok(p) => {
            ok &= report(6, "trend reproduction", None, || c6_trend(p, elapsed));
        }
        Err(e) => {
            ok &= report(6, "trend reproduction", None, || Err(e.clone()));
        }
    }
    ok &= report(7, "missingness control", None, c7_missingness);
    match &pipeline {
        Ok(p) => {
            ok &= report(8, "lopo heterogeneity", None, || c8_lopo(p));
            ok &= report(9, "determinism", None, || c9_determinism(p));
        }
        Err(e) => {
            ok &= report(8, "lopo heterogeneity", None, || Err(e.clone()));
            ok &= report(9, "determinism", None, || Err(e.clone()));
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
