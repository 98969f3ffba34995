//! Friedman and Wilcoxon signed-rank tests, Bonferroni thresholds and
//! balanced latin squares.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::AnalyticsError;

/// Exact Friedman p is used while (k!)ⁿ stays at or below this.
pub const FRIEDMAN_EXACT_LIMIT: f64 = 1e7;
/// Exact Wilcoxon p is used up to this many nonzero differences.
pub const WILCOXON_EXACT_MAX_N: usize = 12;

/// Mid-ranks (1-based), doubled so that ties stay integral.
pub fn doubled_ranks(values: &[f64]) -> Vec<i64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0i64; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // positions i..=j share rank (i+1 + j+1)/2
        let r2 = (i + j + 2) as i64;
        for &p in &idx[i..=j] {
            out[p] = r2;
        }
        i = j + 1;
    }
    out
}

pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    doubled_ranks(values)
        .into_iter()
        .map(|r| r as f64 / 2.0)
        .collect()
}

/// Σ(t³ − t) over tie groups.
fn tie_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        sum += t * t * t - t;
        i = j + 1;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    Exact,
    ChiSquare,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub n: usize,
    pub k: usize,
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
    pub method: PMethod,
    /// Chi-square upper tail, reported even when `p` is exact.
    pub p_chi2: f64,
}

impl FriedmanResult {
    pub fn report(&self) -> String {
        format!("χ²({})={:.3}, p={:.3}", self.df, self.chi2, self.p)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// Distinct permutations of `items` (a multiset), each with its
/// multiplicity.
fn distinct_permutations(items: &[i64]) -> Vec<(Vec<i64>, f64)> {
    let mut counts: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut cur = items.to_vec();
    permute(&mut cur, 0, &mut |p| {
        *counts.entry(p.to_vec()).or_insert(0.0) += 1.0
    });
    let mut out: Vec<_> = counts.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn permute(v: &mut Vec<i64>, i: usize, f: &mut impl FnMut(&[i64])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permute(v, i + 1, f);
        v.swap(i, j);
    }
}

/// Friedman test on `rows` (subjects) × columns (treatments). Ranks within
/// each row use mid-ranks; the statistic is tie-corrected. Small tables get
/// the exact permutation p, larger ones the chi-square tail.
pub fn friedman(rows: &[Vec<f64>]) -> Result<FriedmanResult, AnalyticsError> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(AnalyticsError::InvalidTable(format!(
            "need ≥ 2 rows and ≥ 2 columns, got {n}×{k}"
        )));
    }
    if let Some(i) = rows
        .iter()
        .position(|r| r.len() != k || r.iter().any(|x| !x.is_finite()))
    {
        return Err(AnalyticsError::IncompleteTable(i));
    }
    let ranks: Vec<Vec<i64>> = rows.iter().map(|r| doubled_ranks(r)).collect();
    let (nf, kf) = (n as f64, k as f64);
    let ties: f64 = rows.iter().map(|r| tie_sum(r)).sum();
    let denom = 1.0 - ties / (nf * kf * (kf * kf - 1.0));
    let df = k - 1;
    if denom <= 1e-12 {
        return Ok(FriedmanResult {
            n,
            k,
            chi2: 0.0,
            df,
            p: 1.0,
            method: PMethod::Exact,
            p_chi2: 1.0,
        });
    }
    // Σ R_j² with doubled ranks is 4·Σ R_j²; integer until here.
    let col_sums =
        |rk: &[Vec<i64>]| -> Vec<i64> { (0..k).map(|j| rk.iter().map(|r| r[j]).sum()).collect() };
    let ss = |sums: &[i64]| -> i64 { sums.iter().map(|s| s * s).sum() };
    let observed = ss(&col_sums(&ranks));
    let chi2_of = |ss4: i64| {
        let raw = 12.0 / (nf * kf * (kf + 1.0)) * (ss4 as f64 / 4.0) - 3.0 * nf * (kf + 1.0);
        (raw / denom).max(0.0)
    };
    let chi2 = chi2_of(observed);
    let p_chi2 = ChiSquared::new(df as f64).expect("df ≥ 1").sf(chi2);

    if factorial(k).powi(n as i32) > FRIEDMAN_EXACT_LIMIT {
        return Ok(FriedmanResult {
            n,
            k,
            chi2,
            df,
            p: p_chi2,
            method: PMethod::ChiSquare,
            p_chi2,
        });
    }
    // Distribution of the column-sum vector when each row's ranks are
    // permuted independently and uniformly.
    let mut dist: HashMap<Vec<i64>, f64> = HashMap::from([(vec![0i64; k], 1.0)]);
    for r in &ranks {
        let perms = distinct_permutations(r);
        let total: f64 = perms.iter().map(|p| p.1).sum();
        let mut next: HashMap<Vec<i64>, f64> = HashMap::with_capacity(dist.len() * perms.len());
        for (sums, prob) in &dist {
            for (perm, mult) in &perms {
                let key: Vec<i64> = sums.iter().zip(perm).map(|(a, b)| a + b).collect();
                *next.entry(key).or_insert(0.0) += prob * mult / total;
            }
        }
        dist = next;
    }
    let mut tail: Vec<f64> = dist
        .iter()
        .filter(|(s, _)| ss(s) >= observed)
        .map(|(_, &p)| p)
        .collect();
    tail.sort_by(f64::total_cmp);
    let p = tail.iter().sum::<f64>().min(1.0);
    Ok(FriedmanResult {
        n,
        k,
        chi2,
        df,
        p,
        method: PMethod::Exact,
        p_chi2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs with a nonzero difference.
    pub n: usize,
    /// Rank sums of positive and negative differences `a − b`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// Normal score of the smaller rank sum (continuity corrected); ≤ 0.
    pub z: f64,
    pub p: f64,
    pub method: PMethod,
    pub warning: Option<String>,
}

impl WilcoxonResult {
    pub fn report(&self) -> String {
        format!("Z={:.3}, p={:.3}", self.z, self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact up to [`WILCOXON_EXACT_MAX_N`], normal beyond.
    Auto,
    Exact,
    Normal,
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, AnalyticsError> {
    wilcoxon_with(a, b, WilcoxonMethod::Auto)
}

/// Two-sided Wilcoxon signed-rank test. Zero differences are dropped and
/// tied magnitudes share mid-ranks.
pub fn wilcoxon_with(
    a: &[f64],
    b: &[f64],
    method: WilcoxonMethod,
) -> Result<WilcoxonResult, AnalyticsError> {
    if a.len() != b.len() {
        return Err(AnalyticsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(AnalyticsError::InvalidTable("need at least 2 pairs".into()));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(AnalyticsError::InvalidTable("non-finite value".into()));
    }
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n,
            w_plus: 0.0,
            w_minus: 0.0,
            z: 0.0,
            p: 1.0,
            method: PMethod::Exact,
            warning: Some("all differences are zero".into()),
        });
    }
    let mags: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let r2 = doubled_ranks(&mags);
    let wp2: i64 = r2
        .iter()
        .zip(&d)
        .filter(|(_, x)| **x > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total2: i64 = r2.iter().sum();
    let (w_plus, w_minus) = (wp2 as f64 / 2.0, (total2 - wp2) as f64 / 2.0);

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum(&mags) / 48.0;
    let dev = (w_plus - mean).abs();
    let z = if var > 0.0 {
        -((dev - 0.5).max(0.0) / var.sqrt())
    } else {
        0.0
    };
    let p_normal = (2.0 * Normal::standard().cdf(z)).min(1.0);

    let exact = match method {
        WilcoxonMethod::Auto => n <= WILCOXON_EXACT_MAX_N,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    if !exact {
        return Ok(WilcoxonResult {
            n,
            w_plus,
            w_minus,
            z,
            p: p_normal,
            method: PMethod::Normal,
            warning: None,
        });
    }
    // Null distribution of 2·W+ by dynamic programming over sign choices.
    let mut dist: HashMap<i64, f64> = HashMap::from([(0, 1.0)]);
    for &r in &r2 {
        let mut next: HashMap<i64, f64> = HashMap::with_capacity(dist.len() * 2);
        for (&w, &p) in &dist {
            *next.entry(w).or_insert(0.0) += 0.5 * p;
            *next.entry(w + r).or_insert(0.0) += 0.5 * p;
        }
        dist = next;
    }
    // |W+ − mean| scaled by 4 so it stays integral.
    let dev4 = (2 * wp2 - total2).abs();
    let mut tail: Vec<f64> = dist
        .iter()
        .filter(|(&w, _)| (2 * w - total2).abs() >= dev4)
        .map(|(_, &p)| p)
        .collect();
    tail.sort_by(f64::total_cmp);
    let p = tail.iter().sum::<f64>().min(1.0);
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        z,
        p,
        method: PMethod::Exact,
        warning: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bonferroni {
    pub threshold: f64,
    /// Threshold rounded to 3 decimals, as reported.
    pub reported: f64,
}

pub fn bonferroni(alpha: f64, m: usize) -> Result<Bonferroni, AnalyticsError> {
    if m == 0 || !(0.0..=1.0).contains(&alpha) {
        return Err(AnalyticsError::InvalidTable(format!(
            "bonferroni needs m ≥ 1 and alpha in [0, 1], got {alpha}, {m}"
        )));
    }
    let threshold = alpha / m as f64;
    Ok(Bonferroni {
        threshold,
        reported: round3(threshold),
    })
}

pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Williams design: each condition once per row and per column, and each
/// ordered pair of adjacent conditions equally often. Odd `k` gives 2k rows
/// (the square followed by its mirror).
pub fn latin_square(k: usize) -> Result<Vec<Vec<usize>>, AnalyticsError> {
    if k < 2 {
        return Err(AnalyticsError::InvalidTable(format!(
            "latin square needs k ≥ 2, got {k}"
        )));
    }
    let mut first = Vec::with_capacity(k);
    let (mut lo, mut hi) = (0usize, k);
    for i in 0..k {
        if i % 2 == 0 {
            first.push(lo);
            lo += 1;
        } else {
            hi -= 1;
            first.push(hi);
        }
    }
    let mut rows: Vec<Vec<usize>> = (0..k)
        .map(|r| first.iter().map(|c| (c + r) % k).collect())
        .collect();
    if k % 2 == 1 {
        let mirrored: Vec<_> = rows
            .iter()
            .map(|r| r.iter().rev().copied().collect())
            .collect();
        rows.extend(mirrored);
    }
    Ok(rows)
}
