//! Wilcoxon signed-rank test for paired comparisons: exact distribution for
//! small samples (treating ties by averaged ranks), normal approximation
//! with continuity and tie corrections above that, and a Bonferroni helper
//! for reporting several comparisons together.

use serde::{Deserialize, Serialize};

use crate::theory::normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// Median difference greater than zero.
    Greater,
    /// Median difference less than zero.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonOutcome {
    /// Sum of the ranks of the positive differences (W+).
    pub statistic: f64,
    /// Pairs remaining after dropping zero differences.
    pub n_used: usize,
    pub p_value: f64,
    /// Whether the exact permutation distribution was used.
    pub exact: bool,
}

/// Pairs above this count use the normal approximation.
const EXACT_LIMIT: usize = 25;

/// Average ranks of the absolute differences, ties sharing their mean rank.
/// Returns (ranks aligned with `diffs`, tie group sizes).
fn average_ranks(abs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = abs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let group = j - i + 1;
        // Ranks i+1 ..= j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        ties.push(group);
        i = j + 1;
    }
    (ranks, ties)
}

/// Exact tail probabilities of W+ over sign flips of the given ranks, via a
/// subset-sum count over doubled (integer) ranks.
fn exact_tails(ranks: &[f64], statistic: f64) -> (f64, f64) {
    let scaled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = scaled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &scaled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let denom = 2.0f64.powi(ranks.len() as i32);
    let w2 = (2.0 * statistic).round() as usize;
    let p_greater: f64 = counts[w2..].iter().sum::<f64>() / denom;
    let p_less: f64 = counts[..=w2].iter().sum::<f64>() / denom;
    (p_greater, p_less)
}

/// Normal approximation with continuity correction and the tie correction
/// `sum(t^3 - t) / 48` subtracted from the variance.
fn normal_tails(n: usize, ties: &[usize], statistic: f64) -> (f64, f64) {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_correction: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            (t * t * t - t) / 48.0
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction;
    if var <= 0.0 {
        // All differences tied at one magnitude with every sign flip giving
        // the same statistic; no evidence either way.
        return (1.0, 1.0);
    }
    let sd = var.sqrt();
    let p_greater = 1.0 - normal_cdf((statistic - mean - 0.5) / sd);
    let p_less = normal_cdf((statistic - mean + 0.5) / sd);
    (p_greater, p_less)
}

/// Wilcoxon signed-rank test on a sample of paired differences. Zero
/// differences are dropped.
pub fn wilcoxon_signed_rank(diffs: &[f64], alternative: Alternative) -> WilcoxonOutcome {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return WilcoxonOutcome {
            statistic: 0.0,
            n_used: 0,
            p_value: 1.0,
            exact: true,
        };
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let statistic: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();

    let exact = n <= EXACT_LIMIT;
    let (p_greater, p_less) = if exact {
        exact_tails(&ranks, statistic)
    } else {
        normal_tails(n, &ties, statistic)
    };
    let p_value = match alternative {
        Alternative::Greater => p_greater,
        Alternative::Less => p_less,
        Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
    };
    WilcoxonOutcome {
        statistic,
        n_used: n,
        p_value: p_value.clamp(0.0, 1.0),
        exact,
    }
}

/// Bonferroni adjustment for a family of `comparisons` tests.
pub fn bonferroni(p_value: f64, comparisons: usize) -> f64 {
    (p_value * comparisons.max(1) as f64).min(1.0)
}
