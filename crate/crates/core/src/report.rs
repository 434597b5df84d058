//! Box-plot statistics, a hand-written SVG figure and markdown/CSV
//! summary tables.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{Regime, ResultTable};
use crate::preprocess::percentile_sorted;
use crate::stats::summarize;

/// Dice level marked with a dashed reference line.
pub const REFERENCE_DICE: f64 = 0.70;
pub const TUKEY_K: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Most extreme values inside the 1.5 IQR fences.
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub n: usize,
}

impl BoxStats {
    pub fn is_degenerate(&self) -> bool {
        self.q1 == self.q3
    }
}

pub fn tukey_box(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("box needs finite values".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let q1 = percentile_sorted(&s, 25.0);
    let q3 = percentile_sorted(&s, 75.0);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - TUKEY_K * iqr, q3 + TUKEY_K * iqr);
    let whisker_lo = s.iter().copied().find(|&v| v >= lo).unwrap_or(q1);
    let whisker_hi = s.iter().rev().copied().find(|&v| v <= hi).unwrap_or(q3);
    Ok(BoxStats {
        q1,
        median: percentile_sorted(&s, 50.0),
        q3,
        whisker_lo,
        whisker_hi,
        n: s.len(),
    })
}

const SVG_W: f64 = 960.0;
const SVG_H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 70.0;

fn regime_colour(r: Regime) -> &'static str {
    match r {
        Regime::Matched => "#f28e2b",
        Regime::CrossRes => "#4e79a7",
        Regime::Zbin => "#59a14f",
        Regime::Lopo => "#b07aa1",
    }
}

fn regime_label(r: Regime) -> &'static str {
    match r {
        Regime::Matched => "Matched resolution",
        Regime::CrossRes => "Trained at native pitch",
        Regime::Zbin => "Z-binned inputs",
        Regime::Lopo => "Leave one papyrus out",
    }
}

/// Grouped box plot of Dice per pitch, one box per (regime, pitch), with
/// a dashed line at Dice 0.70. Output is a pure function of the tables.
pub fn box_plot_svg(tables: &[(Regime, &ResultTable)]) -> Result<String> {
    let mut pitches: Vec<f64> = Vec::new();
    for (_, t) in tables {
        for p in t.pitches() {
            if !pitches.contains(&p) {
                pitches.push(p);
            }
        }
    }
    pitches.sort_by(f64::total_cmp);
    if pitches.is_empty() {
        return Err(Error::InvalidInput("no results to plot".into()));
    }
    let plot_w = SVG_W - LEFT - RIGHT;
    let plot_h = SVG_H - TOP - BOTTOM;
    let y = |d: f64| TOP + (1.0 - d.clamp(0.0, 1.0)) * plot_h;
    let slot = plot_w / pitches.len() as f64;
    let box_w = slot * 0.8 / tables.len().max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>"#);
    for i in 0..=5 {
        let d = i as f64 / 5.0;
        let yy = y(d);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/>"##,
            SVG_W - RIGHT
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{d:.1}</text>"#,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line class="reference" x1="{LEFT:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#444444" stroke-dasharray="6,4"/>"##,
        y(REFERENCE_DICE),
        SVG_W - RIGHT
    );
    for (pi, p) in pitches.iter().enumerate() {
        let cx = LEFT + slot * (pi as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{p}</text>"#,
            TOP + plot_h + 18.0
        );
        for (ri, (regime, table)) in tables.iter().enumerate() {
            let values = table.dice_at(*p);
            if values.is_empty() {
                continue;
            }
            let b = tukey_box(&values)?;
            let x0 = cx - 0.4 * slot + box_w * ri as f64 + box_w * 0.1;
            let w = box_w * 0.8;
            let mid = x0 + w / 2.0;
            let colour = regime_colour(*regime);
            let _ = writeln!(s, r#"<g class="box" data-regime="{regime}" data-pitch="{p}">"#);
            let _ = writeln!(
                s,
                r#"<line x1="{mid:.2}" y1="{:.2}" x2="{mid:.2}" y2="{:.2}" stroke="black"/>"#,
                y(b.whisker_hi),
                y(b.q3)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{mid:.2}" y1="{:.2}" x2="{mid:.2}" y2="{:.2}" stroke="black"/>"#,
                y(b.q1),
                y(b.whisker_lo)
            );
            for wv in [b.whisker_lo, b.whisker_hi] {
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{yw:.2}" x2="{:.2}" y2="{yw:.2}" stroke="black"/>"#,
                    mid - w / 4.0,
                    mid + w / 4.0,
                    yw = y(wv)
                );
            }
            if b.is_degenerate() {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x0:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="{colour}" stroke-width="2"/>"#,
                    y(b.q1),
                    x0 + w
                );
            } else {
                let _ = writeln!(
                    s,
                    r#"<rect x="{x0:.2}" y="{:.2}" width="{w:.2}" height="{:.2}" fill="{colour}" fill-opacity="0.8" stroke="black"/>"#,
                    y(b.q3),
                    y(b.q1) - y(b.q3)
                );
            }
            let _ = writeln!(
                s,
                r#"<line x1="{x0:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black" stroke-width="2"/>"#,
                y(b.median),
                x0 + w
            );
            let _ = writeln!(s, "</g>");
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Pixel size (µm)</text>"#,
        LEFT + plot_w / 2.0,
        SVG_H - 30.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">Dice</text>"#,
        TOP + plot_h / 2.0
    );
    for (ri, (regime, _)) in tables.iter().enumerate() {
        let lx = LEFT + 10.0 + 220.0 * ri as f64;
        let ly = SVG_H - 14.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{}"/>"#,
            ly - 10.0,
            regime_colour(*regime)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#,
            lx + 18.0,
            regime_label(*regime)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// One summary row per (regime, pitch).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub regime: Regime,
    pub pitch_um: f64,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    pub sd: f64,
}

pub fn summary_rows(tables: &[(Regime, &ResultTable)]) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for (regime, t) in tables {
        for p in t.pitches() {
            let s = summarize(&t.dice_at(p))?;
            out.push(SummaryRow {
                regime: *regime,
                pitch_um: p,
                n: s.n,
                median: s.median,
                q1: s.q1,
                q3: s.q3,
                mean: s.mean,
                sd: s.sd,
            });
        }
    }
    Ok(out)
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv flush: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Markdown table with pitches as rows and, per regime, `median [Q1, Q3]`
/// and `mean ± s.d.` columns.
pub fn summary_markdown(rows: &[SummaryRow]) -> String {
    let mut regimes: Vec<Regime> = Vec::new();
    let mut pitches: Vec<f64> = Vec::new();
    for r in rows {
        if !regimes.contains(&r.regime) {
            regimes.push(r.regime);
        }
        if !pitches.contains(&r.pitch_um) {
            pitches.push(r.pitch_um);
        }
    }
    pitches.sort_by(f64::total_cmp);
    let mut s = String::from("| Pixel size (µm) |");
    for r in &regimes {
        let _ = write!(s, " {} median [Q1, Q3] | {} mean ± s.d. |", regime_label(*r), regime_label(*r));
    }
    s.push_str("\n|---|");
    for _ in &regimes {
        s.push_str("---|---|");
    }
    s.push('\n');
    for p in &pitches {
        let _ = write!(s, "| {p} |");
        for reg in &regimes {
            match rows.iter().find(|r| r.regime == *reg && r.pitch_um == *p) {
                Some(r) => {
                    let _ = write!(
                        s,
                        " {:.3} [{:.3}, {:.3}] | {:.3} ± {:.3} |",
                        r.median, r.q1, r.q3, r.mean, r.sd
                    );
                }
                None => s.push_str(" – | – |"),
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ResultRow;
    use proptest::prelude::*;

    fn brute_whiskers(v: &[f64]) -> (f64, f64) {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = (s.len() - 1) as f64 * p;
            let (i, f) = (pos.floor() as usize, pos - pos.floor());
            if i + 1 < s.len() {
                s[i] + (s[i + 1] - s[i]) * f
            } else {
                s[i]
            }
        };
        let (q1, q3) = (q(0.25), q(0.75));
        let (lo, hi) = (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1));
        let mut wl = f64::INFINITY;
        let mut wh = f64::NEG_INFINITY;
        for &x in v {
            if x >= lo && x < wl {
                wl = x;
            }
            if x <= hi && x > wh {
                wh = x;
            }
        }
        (wl, wh)
    }

    proptest! {
        #[test]
        fn whiskers_match_fence_oracle(v in prop::collection::vec(-2.0..3.0f64, 1..40)) {
            let b = tukey_box(&v).unwrap();
            prop_assert_eq!((b.whisker_lo, b.whisker_hi), brute_whiskers(&v));
            prop_assert!(b.whisker_lo <= b.q1 + 1e-12 || b.whisker_lo <= b.median);
            prop_assert!(b.q1 <= b.median && b.median <= b.q3);
        }
    }

    #[test]
    fn outlier_is_excluded_from_whisker() {
        let b = tukey_box(&[0.5, 0.52, 0.54, 0.56, 0.58, 0.0]).unwrap();
        assert_eq!(b.whisker_lo, 0.5);
        assert_eq!(b.whisker_hi, 0.58);
    }

    fn table(regime: Regime, pitches: &[f64], f: impl Fn(usize, usize) -> f64) -> ResultTable {
        let mut rows = Vec::new();
        for (j, &p) in pitches.iter().enumerate() {
            for i in 0..6 {
                rows.push(ResultRow {
                    sample_id: format!("s{i}"),
                    papyrus_id: "P".into(),
                    regime,
                    pitch_um: p,
                    dice: f(i, j),
                    fold: 0,
                    model_id: "m".into(),
                });
            }
        }
        ResultTable { rows }
    }

    #[test]
    fn svg_has_one_box_per_regime_and_pitch() {
        let ladder = crate::resample::PitchLadder::default();
        let pitches = ladder.pitches_um.clone();
        let m = table(Regime::Matched, &pitches, |i, j| 0.9 - 0.04 * j as f64 + 0.01 * i as f64);
        let c = table(Regime::CrossRes, &pitches, |_, j| if j == 0 { 0.9 } else { 0.2 });
        let svg = box_plot_svg(&[(Regime::Matched, &m), (Regime::CrossRes, &c)]).unwrap();
        assert_eq!(svg.matches(r#"class="box""#).count(), 18);
        assert!(svg.contains(r#"stroke-dasharray="6,4""#));
        // constant cross-res values give degenerate boxes drawn as lines
        assert_eq!(svg.matches("<rect").count(), 1 + 9 + 2);
        assert_eq!(svg, box_plot_svg(&[(Regime::Matched, &m), (Regime::CrossRes, &c)]).unwrap());
    }

    #[test]
    fn markdown_has_row_per_pitch() {
        let m = table(Regime::Matched, &[0.34, 0.68], |i, _| i as f64 / 10.0);
        let rows = summary_rows(&[(Regime::Matched, &m)]).unwrap();
        let md = summary_markdown(&rows);
        assert_eq!(md.lines().count(), 4);
        assert!(md.contains("| 0.34 | 0.250 [0.125, 0.375] | 0.250 ± 0.187 |"));
        assert!(summary_csv(&rows).unwrap().starts_with("regime,pitch_um,n,median,q1,q3,mean,sd\n"));
    }
}
