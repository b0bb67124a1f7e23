use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Largest number of nonzero differences for which the Wilcoxon p-value is
/// computed from the exact null distribution.
pub const EXACT_MAX_N: usize = 20;

const MIN_NONZERO: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub w: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Nonzero differences.
    pub n: usize,
    pub z: f64,
    pub p_value: f64,
    /// `|z| / sqrt(n)`.
    pub effect_size: f64,
    pub exact: bool,
}

/// 1-based ranks with ties sharing their average rank.
pub(crate) fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rank correlation with a two-tailed p-value from the
/// t-approximation on `n - 2` degrees of freedom.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<RankCorrelation> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), actual: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Statistics(format!("rank correlation needs at least 3 pairs, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Statistics("non-finite value in rank correlation input".into()));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::Statistics("rank correlation is undefined for a constant vector".into()));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y));
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    let p_value = if denom <= 0.0 {
        0.0
    } else {
        let t = rho.abs() * (df / denom).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Statistics(e.to_string()))?;
        (2.0 * dist.sf(t)).min(1.0)
    };
    Ok(RankCorrelation { rho, p_value, n })
}

/// Number of sign assignments giving each doubled rank sum.
fn exact_counts(doubled: &[usize]) -> Vec<f64> {
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled {
        reach += r;
        for s in (r..=reach).rev() {
            counts[s] += counts[s - r];
        }
    }
    counts
}

/// Two-tailed Wilcoxon signed-rank test on paired samples `a - b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), actual: b.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&v| v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Statistics("non-finite paired difference".into()));
    }
    let n = d.len();
    if n < MIN_NONZERO {
        return Err(Error::Statistics(format!(
            "signed-rank test needs at least {MIN_NONZERO} nonzero differences, got {n}"
        )));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, &v)| v > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let mean = total / 2.0;
    let mut ties = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    let var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - ties / 48.0;
    let z = if var > 0.0 { ((w - mean + 0.5).min(0.0)) / var.sqrt() } else { 0.0 };

    let exact = n <= EXACT_MAX_N;
    let p_value = if exact {
        // averaged ranks are multiples of 1/2
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let counts = exact_counts(&doubled);
        let limit = (2.0 * w).round() as usize;
        let tail: f64 = counts[..=limit].iter().sum();
        (2.0 * tail / 2f64.powi(n as i32)).min(1.0)
    } else {
        let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Statistics(e.to_string()))?;
        (2.0 * normal.cdf(z)).min(1.0)
    };
    Ok(WilcoxonResult {
        w,
        w_plus,
        w_minus,
        n,
        z,
        p_value,
        effect_size: z.abs() / (n as f64).sqrt(),
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 2.5, 3.0, 7.0, 9.0];
        let r = spearman_rho(&x, &x).unwrap();
        assert_eq!((r.rho, r.p_value), (1.0, 0.0));
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert_eq!(spearman_rho(&x, &rev).unwrap().rho, -1.0);
    }

    #[test]
    fn spearman_errors() {
        assert!(spearman_rho(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ties_share_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn all_positive_differences() {
        let a = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let b = [0.0; 6];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.w, 0.0);
        assert_eq!(r.w_plus, 21.0);
        assert!(r.exact);
        assert!((r.p_value - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_rejected() {
        let a = [0.9; 10];
        assert!(wilcoxon_signed_rank(&a, &a).is_err());
        assert!(wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).is_err());
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let a: Vec<f64> = (0..30).map(|k| k as f64 + 1.0).collect();
        let b: Vec<f64> = (0..30).map(|k| if k % 3 == 0 { k as f64 + 3.0 } else { 0.0 }).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value < 0.05);
        assert!((r.effect_size - r.z.abs() / (30f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_counts_are_symmetric() {
        let c = exact_counts(&[2, 4, 6, 8]);
        assert_eq!(c.iter().sum::<f64>(), 16.0);
        for s in 0..c.len() {
            assert_eq!(c[s], c[c.len() - 1 - s]);
        }
    }
}
