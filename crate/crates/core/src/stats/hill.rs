use serde::Serialize;

use super::StatsError;

/// Fractions at which tail reports are produced.
pub const REPORT_FRACTIONS: [f64; 3] = [0.025, 0.05, 0.10];

const MIN_SAMPLES: usize = 1000;
const MIN_TAIL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub alpha: f64,
    /// Number of order statistics in the tail.
    pub k: usize,
    pub std_err: f64,
    /// Smallest value counted as tail.
    pub threshold: f64,
}

/// Hill estimate from the largest `tail_fraction * n` order statistics:
/// `alpha = k / sum ln(x_(i) / x_(k+1))`.
pub fn hill_estimator(samples: &[f64], tail_fraction: f64) -> Result<TailEstimate, StatsError> {
    if samples.len() < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples { need: MIN_SAMPLES, got: samples.len() });
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 0.1) {
        return Err(StatsError::InvalidInput(format!("tail fraction {tail_fraction} not in (0, 0.1]")));
    }
    let k = (tail_fraction * samples.len() as f64).floor() as usize;
    if k < MIN_TAIL {
        return Err(StatsError::TooFewSamples { need: MIN_TAIL, got: k });
    }
    let mut sorted: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
    if sorted.iter().any(|v| v.is_nan()) {
        return Err(StatsError::InvalidInput("NaN sample".into()));
    }
    // only the top k+1 need to be ordered
    sorted.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = sorted[k];
    if threshold <= 0.0 {
        return Err(StatsError::Degenerate("tail threshold is zero"));
    }
    let ln_t = threshold.ln();
    let sum: f64 = sorted[..k].iter().map(|v| v.ln() - ln_t).sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err(StatsError::Degenerate("no spread above the tail threshold"));
    }
    let alpha = k as f64 / sum;
    Ok(TailEstimate { alpha, k, std_err: alpha / (k as f64).sqrt(), threshold })
}

/// Power-law exponent of samples restricted to `[lo, hi]`.
///
/// Maximum-likelihood for a Pareto density truncated to the window; reduces
/// to the Hill estimator with threshold `lo` as `hi -> inf`.
pub fn hill_window(samples: &[f64], lo: f64, hi: f64) -> Result<TailEstimate, StatsError> {
    if !(lo > 0.0 && hi > lo) {
        return Err(StatsError::InvalidInput(format!("window [{lo}, {hi}]")));
    }
    let logs: Vec<f64> = samples.iter().filter(|&&v| v >= lo && v <= hi).map(|v| (v / lo).ln()).collect();
    let k = logs.len();
    if k < MIN_TAIL {
        return Err(StatsError::TooFewSamples { need: MIN_TAIL, got: k });
    }
    let mean_log = logs.iter().sum::<f64>() / k as f64;
    if mean_log <= 0.0 {
        return Err(StatsError::Degenerate("all window samples at the lower edge"));
    }
    let span = (hi / lo).ln();
    // Score: 1/a - mean_log - span r^a / (1 - r^a) with r = lo/hi; strictly
    // decreasing in a, so bisection on a bracket is safe.
    let score = |a: f64| {
        let ra = (-a * span).exp();
        1.0 / a - mean_log - span * ra / (1.0 - ra)
    };
    let (mut a_lo, mut a_hi) = (1e-6, 1.0 / mean_log);
    // the untruncated Hill value is an upper bound only when the window is
    // wide; widen until the score changes sign
    while score(a_hi) > 0.0 && a_hi < 1e6 {
        a_hi *= 2.0;
    }
    if score(a_lo) < 0.0 {
        return Err(StatsError::Degenerate("window samples flatter than uniform in log"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a_lo + a_hi);
        if score(mid) > 0.0 {
            a_lo = mid;
        } else {
            a_hi = mid;
        }
    }
    let alpha = 0.5 * (a_lo + a_hi);
    Ok(TailEstimate { alpha, k, std_err: alpha / (k as f64).sqrt(), threshold: lo })
}

/// Hill estimates at several tail fractions, with a stability verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub estimates: Vec<(f64, TailEstimate)>,
    /// Largest relative deviation of any estimate from the middle one.
    pub spread: f64,
    /// False when the estimates disagree by more than 25%, i.e. no single
    /// power law describes the tail.
    pub stable: bool,
}

pub fn tail_report(samples: &[f64], fractions: &[f64]) -> Result<TailReport, StatsError> {
    let estimates = fractions
        .iter()
        .map(|&f| hill_estimator(samples, f).map(|e| (f, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let mid = estimates[estimates.len() / 2].1.alpha;
    let spread = estimates.iter().map(|(_, e)| (e.alpha / mid - 1.0).abs()).fold(0.0, f64::max);
    Ok(TailReport { estimates, spread, stable: spread <= 0.25 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pareto(n: usize, alpha: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha)).collect()
    }

    #[test]
    fn recovers_pareto_exponent() {
        let x = pareto(100_000, 2.5, 1);
        let e = hill_estimator(&x, 0.05).unwrap();
        assert_eq!(e.k, 5000);
        assert!((e.alpha - 2.5).abs() < 0.1, "{}", e.alpha);
        assert!((e.std_err - e.alpha / 5000f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scale_invariant() {
        let x = pareto(20_000, 1.7, 2);
        let a = hill_estimator(&x, 0.05).unwrap().alpha;
        let x4: Vec<f64> = x.iter().map(|v| 4.0 * v).collect();
        assert_eq!(hill_estimator(&x4, 0.05).unwrap().alpha, a);
        let x3: Vec<f64> = x.iter().map(|v| 3.7e-4 * v).collect();
        assert!((hill_estimator(&x3, 0.05).unwrap().alpha / a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail_is_unstable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..100_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let r = tail_report(&x, &[0.0025, 0.01, 0.1]).unwrap();
        let alphas: Vec<f64> = r.estimates.iter().map(|(_, e)| e.alpha).collect();
        assert!(alphas[0] > alphas[1] && alphas[1] > alphas[2], "{alphas:?}");
        assert!(!r.stable);
        let p = tail_report(&pareto(100_000, 2.5, 4), &REPORT_FRACTIONS).unwrap();
        assert!(p.stable, "{p:?}");
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(hill_estimator(&vec![3.0; 5000], 0.05), Err(StatsError::Degenerate("no spread above the tail threshold")));
        assert!(matches!(hill_estimator(&[1.0; 10], 0.05), Err(StatsError::TooFewSamples { .. })));
        assert!(matches!(hill_estimator(&pareto(2000, 2.0, 1), 0.2), Err(StatsError::InvalidInput(_))));
        assert!(matches!(hill_estimator(&pareto(2000, 2.0, 1), 0.004), Err(StatsError::TooFewSamples { .. })));
        let mut zeros = vec![0.0; 5000];
        zeros[0] = 1.0;
        assert_eq!(hill_estimator(&zeros, 0.05), Err(StatsError::Degenerate("tail threshold is zero")));
    }

    #[test]
    fn window_estimator_on_truncated_pareto() {
        // Pareto(1.1) truncated to [10, 1000] by inverse CDF
        let (a, lo, hi) = (1.1f64, 10.0f64, 1000.0f64);
        let r = (lo / hi).powf(a);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..50_000)
            .map(|_| {
                let u: f64 = rng.random();
                lo * (1.0 - u * (1.0 - r)).powf(-1.0 / a)
            })
            .collect();
        let e = hill_window(&x, lo, hi).unwrap();
        assert!((e.alpha - a).abs() < 0.05, "{}", e.alpha);
        // the untruncated estimator is biased upward on the same data
        let plain = 1.0 / (x.iter().map(|v| (v / lo).ln()).sum::<f64>() / x.len() as f64);
        assert!(plain > e.alpha + 0.02, "{plain}");
    }

    #[test]
    fn window_estimator_matches_hill_for_wide_window() {
        let x = pareto(50_000, 2.0, 9);
        let e = hill_window(&x, 1.0, 1e12).unwrap();
        let direct = 1.0 / (x.iter().map(|v| v.ln()).sum::<f64>() / x.len() as f64);
        assert!((e.alpha - direct).abs() < 1e-6);
    }
}
