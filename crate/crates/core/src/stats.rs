//! Nonparametric tests over paired (subject x condition) score matrices:
//! Friedman, Page's L with a permutation p-value, Wilcoxon signed-rank with
//! Holm adjustment, and quartile summaries.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::preprocess::percentile_sorted;

pub const DEFAULT_PERMUTATIONS: usize = 9999;
/// Largest effective sample size for which Wilcoxon p-values are exact.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

/// Scores for `n` subjects under `k` related conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedMatrix {
    values: Vec<Vec<f64>>,
    condition_order: Vec<String>,
}

impl PairedMatrix {
    pub fn new(values: Vec<Vec<f64>>, condition_order: Vec<String>) -> Result<Self> {
        let k = condition_order.len();
        if k < 2 {
            return Err(Error::InvalidInput(format!("need >= 2 conditions, got {k}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need >= 2 subjects, got {}",
                values.len()
            )));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "subject {i} has {} values for {k} conditions",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("subject {i} has a non-finite value")));
            }
        }
        Ok(PairedMatrix {
            values,
            condition_order,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self) -> usize {
        self.condition_order.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn conditions(&self) -> &[String] {
        &self.condition_order
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    fn summaries(&self) -> Result<Vec<ConditionSummary>> {
        (0..self.k())
            .map(|j| {
                Ok(ConditionSummary {
                    condition: self.condition_order[j].clone(),
                    summary: summarize(&self.column(j))?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    pub sd: f64,
    /// False for a single value, where `sd` is reported as 0.
    pub sd_defined: bool,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseContrast {
    pub a: String,
    pub b: String,
    pub w: f64,
    pub p_value: f64,
    pub p_holm: f64,
    /// Median of `b - a` over subjects.
    pub median_diff: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub k: usize,
    pub pairwise: Vec<PairwiseContrast>,
    pub summaries: Vec<ConditionSummary>,
}

/// Average (1-based) ranks with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            ranks[p] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sum of `t^3 - t` over tie groups.
fn tie_term(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Friedman omnibus test with the standard tie correction; p from the
/// chi-square upper tail with `k - 1` degrees of freedom.
pub fn friedman(m: &PairedMatrix) -> Result<TestReport> {
    let (n, k) = (m.n() as f64, m.k() as f64);
    let mut rank_sums = vec![0.0; m.k()];
    let mut ties = 0.0;
    for row in m.rows() {
        for (s, r) in rank_sums.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
        ties += tie_term(row);
    }
    let correction = 1.0 - ties / (n * (k * k * k - k));
    if correction <= 1e-12 {
        return Err(Error::DegenerateStatistic(
            "every subject has identical scores across conditions".into(),
        ));
    }
    let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
    let chi2 = (12.0 / (n * k * (k + 1.0)) * ss - 3.0 * n * (k + 1.0)) / correction;
    let dist = ChiSquared::new(k - 1.0).expect("k >= 2");
    Ok(TestReport {
        method: "friedman".into(),
        statistic: chi2,
        p_value: clamp_p(dist.sf(chi2.max(0.0))),
        n: m.n(),
        k: m.k(),
        pairwise: Vec::new(),
        summaries: m.summaries()?,
    })
}

/// Page's L for an increasing trend along `hypothesized_order` (condition
/// labels from lowest to highest expected value).
///
/// The one-sided p-value comes from `n_perm` random within-subject
/// permutations: `p = (#{L_perm >= L_obs} + 1) / (n_perm + 1)`.
pub fn pages_l(
    m: &PairedMatrix,
    hypothesized_order: &[String],
    n_perm: usize,
    seed: u64,
) -> Result<TestReport> {
    if hypothesized_order.len() != m.k() {
        return Err(Error::InvalidInput(format!(
            "order has {} labels for {} conditions",
            hypothesized_order.len(),
            m.k()
        )));
    }
    let mut position = Vec::with_capacity(m.k());
    for label in hypothesized_order {
        let j = m
            .conditions()
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::InvalidInput(format!("unknown condition '{label}' in order")))?;
        if position.contains(&j) {
            return Err(Error::InvalidInput(format!("condition '{label}' repeated in order")));
        }
        position.push(j);
    }
    if n_perm == 0 {
        return Err(Error::InvalidInput("n_perm must be >= 1".into()));
    }

    // Ranks in doubled integer units keep L exact under ties.
    let mut rows: Vec<Vec<i64>> = m
        .rows()
        .iter()
        .map(|row| {
            let ranks = average_ranks(row);
            position.iter().map(|&j| (ranks[j] * 2.0).round() as i64).collect()
        })
        .collect();
    let l_of = |rows: &[Vec<i64>]| -> i64 {
        rows.iter()
            .map(|r| r.iter().enumerate().map(|(j, &x)| (j as i64 + 1) * x).sum::<i64>())
            .sum()
    };
    let observed = l_of(&rows);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least = 0usize;
    for _ in 0..n_perm {
        for r in rows.iter_mut() {
            r.shuffle(&mut rng);
        }
        if l_of(&rows) >= observed {
            at_least += 1;
        }
    }
    let mut summaries = m.summaries()?;
    summaries.sort_by_key(|s| {
        hypothesized_order
            .iter()
            .position(|l| *l == s.condition)
            .unwrap_or(usize::MAX)
    });
    Ok(TestReport {
        method: "page_l_permutation".into(),
        statistic: observed as f64 / 2.0,
        p_value: (at_least + 1) as f64 / (n_perm + 1) as f64,
        n: m.n(),
        k: m.k(),
        pairwise: Vec::new(),
        summaries,
    })
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. `W = min(W+, W-)`. For at most
/// [`WILCOXON_EXACT_MAX_N`] non-zero differences the null distribution of
/// W+ is enumerated over the realised (tie-averaged) ranks; otherwise a
/// tie- and continuity-corrected normal approximation is used.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestReport> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 pairs".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(Error::DegenerateStatistic("all paired differences are zero".into()));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let nr = d.len() as f64;
    let total = nr * (nr + 1.0) / 2.0;
    let w = w_plus.min(total - w_plus);

    let (p, method) = if d.len() <= WILCOXON_EXACT_MAX_N {
        (wilcoxon_exact_p(&ranks, w), "wilcoxon_exact")
    } else {
        let mean = total / 2.0;
        let var = nr * (nr + 1.0) * (2.0 * nr + 1.0) / 24.0 - tie_term(&abs) / 48.0;
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.sf(z), "wilcoxon_normal")
    };
    Ok(TestReport {
        method: method.into(),
        statistic: w,
        p_value: clamp_p(p),
        n: x.len(),
        k: 2,
        pairwise: Vec::new(),
        summaries: Vec::new(),
    })
}

/// `2 * P(W+ <= w)` under random signs, computed by counting sign
/// assignments over the given ranks.
fn wilcoxon_exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    // counts[s] = number of sign patterns with doubled W+ == s
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (w * 2.0).round() as usize;
    let below: f64 = counts[..=limit.min(max)].iter().sum();
    let all = 2f64.powi(ranks.len() as i32);
    (2.0 * below / all).min(1.0)
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in idx.iter().enumerate() {
        let adj = ((m - rank) as f64 * p[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    out
}

/// Median and quartiles (linear-interpolation percentiles), mean and
/// sample standard deviation.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty vector".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let mean = s.iter().sum::<f64>() / n as f64;
    let (sd, sd_defined) = if n > 1 {
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var.sqrt(), true)
    } else {
        (0.0, false)
    };
    Ok(Summary {
        median: percentile_sorted(&s, 50.0),
        q1: percentile_sorted(&s, 25.0),
        q3: percentile_sorted(&s, 75.0),
        mean,
        sd,
        sd_defined,
        n,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    percentile_sorted(&s, 50.0)
}

/// Wilcoxon signed-rank over every pair of conditions with Holm adjustment
/// across the whole family. Pairs with no non-zero difference get p = 1.
pub fn pairwise_wilcoxon(m: &PairedMatrix) -> Result<Vec<PairwiseContrast>> {
    let mut out = Vec::new();
    for a in 0..m.k() {
        for b in a + 1..m.k() {
            let (xa, xb) = (m.column(a), m.column(b));
            let diffs: Vec<f64> = xa.iter().zip(&xb).map(|(u, v)| v - u).collect();
            let (w, p, method) = match wilcoxon_signed_rank(&xa, &xb) {
                Ok(r) => (r.statistic, r.p_value, r.method),
                Err(Error::DegenerateStatistic(_)) => (0.0, 1.0, "all_zero_differences".into()),
                Err(e) => return Err(e),
            };
            out.push(PairwiseContrast {
                a: m.conditions()[a].clone(),
                b: m.conditions()[b].clone(),
                w,
                p_value: p,
                p_holm: p,
                median_diff: median(&diffs),
                method,
            });
        }
    }
    let raw: Vec<f64> = out.iter().map(|c| c.p_value).collect();
    for (c, adj) in out.iter_mut().zip(holm_adjust(&raw)) {
        c.p_holm = adj;
    }
    Ok(out)
}
