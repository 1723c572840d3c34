//! One-sided Wilcoxon signed-rank test for paired samples.

use serde::{Deserialize, Serialize};

/// Exact null distribution is used up to this many non-zero differences.
pub const EXACT_MAX_N: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    /// `a` tends to exceed `b`.
    Greater,
    Less,
}

impl Alternative {
    pub fn as_str(self) -> &'static str {
        match self {
            Alternative::Greater => "greater",
            Alternative::Less => "less",
        }
    }
}

impl std::str::FromStr for Alternative {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(format!("unknown alternative '{other}' (expected greater or less)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Normal,
    /// Every difference was zero; p is 1 by convention.
    AllZeroDifferences,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences `a − b`.
    pub statistic: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub n_effective: usize,
    pub n_pairs: usize,
    pub method: Method,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("paired samples differ in length: {0} vs {1}")]
pub struct LengthMismatch(pub usize, pub usize);

/// Mid-ranks of `values` (1-based), ties sharing their average rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn normal_sf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Null distribution of the doubled statistic `2 W⁺` over all `2ⁿ` sign
/// assignments, as counts indexed by value.
fn exact_counts(doubled_ranks: &[u64]) -> Vec<f64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0.0; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for v in (0..=reach).rev() {
            if counts[v] != 0.0 {
                counts[v + r] += counts[v];
            }
        }
        reach += r;
    }
    counts
}

/// Tests whether `a − b` is shifted in the direction of `alternative`.
///
/// Zero differences are dropped and tied magnitudes get mid-ranks. With at
/// most [`EXACT_MAX_N`] non-zero differences the p-value is the exact tail of
/// the permutation distribution; otherwise a normal approximation with
/// tie-corrected variance and a continuity correction of half the lattice
/// spacing of the statistic is used.
pub fn wilcoxon_signed_rank(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
) -> Result<WilcoxonResult, LengthMismatch> {
    wilcoxon_signed_rank_with(a, b, alternative, PValue::Auto)
}

/// How the p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValue {
    /// Exact up to [`EXACT_MAX_N`] non-zero differences, normal beyond.
    Auto,
    Exact,
    Normal,
}

/// [`wilcoxon_signed_rank`] with the p-value path chosen explicitly.
pub fn wilcoxon_signed_rank_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    path: PValue,
) -> Result<WilcoxonResult, LengthMismatch> {
    if a.len() != b.len() {
        return Err(LengthMismatch(a.len(), b.len()));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|&v| v != 0.0)
        .collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            alternative,
            n_effective: 0,
            n_pairs: a.len(),
            method: Method::AllZeroDifferences,
        });
    }
    let ranks = mid_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    // Mid-ranks are multiples of 1/2, so doubled ranks are exact integers.
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let observed = (2.0 * w_plus).round() as usize;

    let exact = match path {
        PValue::Auto => n <= EXACT_MAX_N,
        PValue::Exact => true,
        PValue::Normal => false,
    };
    let (p, method) = if exact {
        let counts = exact_counts(&doubled);
        let tail: f64 = match alternative {
            Alternative::Greater => counts[observed..].iter().sum(),
            Alternative::Less => counts[..=observed].iter().sum(),
        };
        (tail / 2f64.powi(n as i32), Method::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_sizes(&ranks).map(|t| t * t * t - t).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let spacing = doubled.iter().fold(0, |g, &r| gcd(g, r)) as f64 / 2.0;
        let cc = spacing / 2.0;
        let p = if var <= 0.0 {
            // Cannot happen for n > 0, kept for robustness.
            1.0
        } else {
            let sd = var.sqrt();
            match alternative {
                Alternative::Greater => normal_sf((w_plus - mean - cc) / sd),
                Alternative::Less => normal_sf((mean - w_plus - cc) / sd),
            }
        };
        (p, Method::Normal)
    };
    Ok(WilcoxonResult {
        statistic: w_plus,
        p_value: p.clamp(0.0, 1.0),
        alternative,
        n_effective: n,
        n_pairs: a.len(),
        method,
    })
}

fn tie_sizes(ranks: &[f64]) -> impl Iterator<Item = f64> {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        sizes.push((j - i) as f64);
        i = j;
    }
    sizes.into_iter()
}
