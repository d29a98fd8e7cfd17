//! Paired comparison of batch results with the Wilcoxon signed-rank test.
//!
//! The exact null distribution is computed by dynamic programming over
//! doubled ranks (ties yield half-integer midranks, so doubling makes every
//! rank integral). Above [`EXACT_LIMIT`] nonzero pairs, the usual normal
//! approximation with tie correction takes over.

use statrs::distribution::{ContinuousCDF, Normal};

use super::batch::BatchSummary;

pub const EXACT_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    pub w_minus: f64,
    /// Number of nonzero differences.
    pub n: usize,
    /// Two-sided p-value; 1.0 by convention when every pair is identical.
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Two-sided Wilcoxon signed-rank test on paired differences. Zero
/// differences are dropped before ranking.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> WilcoxonResult {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return WilcoxonResult {
            w_plus: 0.0,
            w_minus: 0.0,
            n: 0,
            p_value: 1.0,
            method: WilcoxonMethod::Exact,
        };
    }
    let method = if n <= EXACT_LIMIT {
        WilcoxonMethod::Exact
    } else {
        WilcoxonMethod::NormalApprox
    };
    wilcoxon_with_method(&nonzero, method)
}

/// Test with an explicit method choice (nonzero differences only).
pub fn wilcoxon_with_method(nonzero: &[f64], method: WilcoxonMethod) -> WilcoxonResult {
    let n = nonzero.len();
    assert!(n > 0, "caller filters zero diffs");

    // Midranks of |d|, ascending.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        nonzero[a]
            .abs()
            .partial_cmp(&nonzero[b].abs())
            .expect("finite diffs")
    });
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nonzero[order[j + 1]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }

    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let w_minus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d < 0.0)
        .map(|(_, r)| *r)
        .sum();

    let p_value = match method {
        WilcoxonMethod::Exact => exact_p(&ranks, w_plus.min(w_minus)),
        WilcoxonMethod::NormalApprox => approx_p(&ranks, w_plus.min(w_minus)),
    };

    WilcoxonResult {
        w_plus,
        w_minus,
        n,
        p_value: p_value.min(1.0),
        method,
    }
}

/// Exact two-sided p-value: 2 · P(W ≤ w_obs) under uniform random signs.
/// Works on doubled ranks so midranks stay integral.
fn exact_p(ranks: &[f64], w_obs: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // dist[w] = probability that the sum of "positive" doubled ranks is w.
    let mut dist = vec![0.0f64; total + 1];
    dist[0] = 1.0;
    let mut upper = 0usize;
    for &r in &doubled {
        upper += r;
        for w in (0..=upper).rev() {
            let stay = dist[w] * 0.5;
            let moved = if w >= r { dist[w - r] * 0.5 } else { 0.0 };
            dist[w] = stay + moved;
        }
    }
    let w2 = (w_obs * 2.0).round() as usize;
    let tail: f64 = dist.iter().take(w2.min(total) + 1).sum();
    2.0 * tail
}

/// Normal approximation with tie correction, no continuity correction,
/// evaluated at W = min(W+, W−).
fn approx_p(ranks: &[f64], w_obs: f64) -> f64 {
    let n = ranks.len() as f64;
    let mu = n * (n + 1.0) / 4.0;
    // Tie correction: group sizes from the midranks.
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ranks"));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let sigma2 = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if sigma2 <= 0.0 {
        return 1.0;
    }
    let z = (w_obs - mu) / sigma2.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * normal.cdf(-z.abs())
}

// ---------------------------------------------------------------------------
// Summary comparison

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("summaries cover different snippet sets")]
    MismatchedCorpora,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub config_a: String,
    pub config_b: String,
    /// Per-snippet coverage deltas (b − a), in snippet order of `a`.
    pub deltas: Vec<(String, f64)>,
    pub mean_delta: f64,
    pub wilcoxon: WilcoxonResult,
}

/// Paired per-snippet coverage comparison with a Wilcoxon signed-rank
/// p-value. Requires identical snippet sets.
pub fn compare_summaries(
    a: &BatchSummary,
    b: &BatchSummary,
) -> Result<ComparisonReport, CompareError> {
    if a.reports.len() != b.reports.len() {
        return Err(CompareError::MismatchedCorpora);
    }
    let mut b_by_snippet = std::collections::HashMap::new();
    for r in &b.reports {
        b_by_snippet.insert(r.snippet.as_str(), r);
    }
    let mut deltas = Vec::with_capacity(a.reports.len());
    for ra in &a.reports {
        let rb = b_by_snippet
            .remove(ra.snippet.as_str())
            .ok_or(CompareError::MismatchedCorpora)?;
        deltas.push((ra.snippet.clone(), rb.coverage() - ra.coverage()));
    }
    if !b_by_snippet.is_empty() {
        return Err(CompareError::MismatchedCorpora);
    }
    let diff_values: Vec<f64> = deltas.iter().map(|(_, d)| *d).collect();
    let mean_delta = if diff_values.is_empty() {
        0.0
    } else {
        diff_values.iter().sum::<f64>() / diff_values.len() as f64
    };
    Ok(ComparisonReport {
        config_a: a.config.clone(),
        config_b: b.config.clone(),
        deltas,
        mean_delta,
        wilcoxon: wilcoxon_signed_rank(&diff_values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference p-values: scipy.stats.wilcoxon for tie-free cases (where
    // its exact mode is the true distribution) and exhaustive sign-flip
    // enumeration for the tied cases (scipy's exact mode truncates midranks
    // to the tie-free table, which is not the conditional permutation
    // distribution this implementation computes).
    const TOL: f64 = 1e-9;

    #[test]
    fn exact_all_positive_twenty() {
        let diffs = vec![0.5; 20];
        let r = wilcoxon_signed_rank(&diffs);
        assert_eq!(r.method, WilcoxonMethod::Exact);
        assert_eq!(r.w_minus, 0.0);
        assert!((r.p_value - 1.9073486328125e-06).abs() < TOL, "p={}", r.p_value);
    }

    #[test]
    fn exact_with_ties() {
        let diffs = vec![1.5, -0.5, 2.0, 2.0, -1.0, 0.5, 3.0, -2.5];
        let r = wilcoxon_signed_rank(&diffs);
        assert_eq!(r.method, WilcoxonMethod::Exact);
        assert_eq!(r.w_plus.min(r.w_minus), 11.5);
        // 2 * 52/256, from enumerating all 2^8 sign assignments.
        assert!((r.p_value - 0.40625).abs() < TOL, "p={}", r.p_value);
    }

    #[test]
    fn zeros_are_dropped() {
        let diffs = vec![0.0, 0.0, 1.0, -2.0, 3.0];
        let r = wilcoxon_signed_rank(&diffs);
        assert_eq!(r.n, 3);
        assert!((r.p_value - 0.75).abs() < TOL, "p={}", r.p_value);
    }

    #[test]
    fn identical_pairs_give_p_one() {
        let r = wilcoxon_signed_rank(&[0.0, 0.0, 0.0]);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n, 0);
    }

    #[test]
    fn exact_matches_reference_distinct_n25() {
        let diffs = vec![
            1.0, 2.0, -3.0, 4.0, 5.0, -6.0, 7.0, 8.0, -9.0, 10.0, 11.0, -12.0, 13.0, 14.0,
            15.0, 16.0, -17.0, 18.0, 19.0, 20.0, 21.0, 22.0, -23.0, 24.0, 25.0,
        ];
        let r = wilcoxon_signed_rank(&diffs);
        assert_eq!(r.method, WilcoxonMethod::Exact);
        assert_eq!(r.w_plus.min(r.w_minus), 70.0);
        assert!(
            (r.p_value - 0.011453330516815186).abs() < TOL,
            "p={}",
            r.p_value
        );
    }

    #[test]
    fn normal_approx_matches_reference() {
        // n = 30, all ties at 0.3.
        let diffs = vec![0.3; 30];
        let r = wilcoxon_with_method(&diffs, WilcoxonMethod::NormalApprox);
        assert!(
            (r.p_value - 4.320463057827488e-08).abs() < 1e-15,
            "p={}",
            r.p_value
        );

        let diffs25 = vec![
            1.0, 2.0, -3.0, 4.0, 5.0, -6.0, 7.0, 8.0, -9.0, 10.0, 11.0, -12.0, 13.0, 14.0,
            15.0, 16.0, -17.0, 18.0, 19.0, 20.0, 21.0, 22.0, -23.0, 24.0, 25.0,
        ];
        let r = wilcoxon_with_method(&diffs25, WilcoxonMethod::NormalApprox);
        assert!(
            (r.p_value - 0.012814284489164544).abs() < 1e-12,
            "p={}",
            r.p_value
        );
    }

    #[test]
    fn uniform_positive_differences_are_significant() {
        // Twenty snippets all improving by 0.5: closed-form exact p is
        // 2 / 2^20.
        let r = wilcoxon_signed_rank(&[0.5; 20]);
        assert!(r.p_value < 0.05);
        assert!((r.p_value - 2.0 / (1u64 << 20) as f64).abs() < TOL);
    }
}
