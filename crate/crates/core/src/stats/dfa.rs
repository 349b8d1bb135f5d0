use serde::Serialize;

use super::{geometric_grid, linear_fit, mean, StatsError};

const MIN_LEN: usize = 1000;
const MIN_SCALES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstEstimate {
    pub hurst: f64,
    pub min_window: usize,
    pub max_window: usize,
    /// R^2 of the log-log fit.
    pub r_squared: f64,
    pub slope_se: f64,
    /// (window size, fluctuation) pairs behind the fit.
    pub fluctuations: Vec<(usize, f64)>,
}

/// DFA with windows from 10 to n/10.
pub fn dfa_hurst_default(series: &[f64]) -> Result<HurstEstimate, StatsError> {
    dfa_hurst(series, 10, series.len() / 10)
}

/// Detrended fluctuation analysis with linear detrending per window.
///
/// The profile (cumulative sum of the demeaned series) is cut into
/// non-overlapping windows from both ends; each window is detrended by a
/// least-squares line and the RMS residual averaged over windows gives
/// F(s). The Hurst exponent is the slope of ln F against ln s.
pub fn dfa_hurst(series: &[f64], min_window: usize, max_window: usize) -> Result<HurstEstimate, StatsError> {
    let n = series.len();
    if n < MIN_LEN {
        return Err(StatsError::TooFewSamples { need: MIN_LEN, got: n });
    }
    if min_window < 4 || max_window <= min_window || max_window > n / 2 {
        return Err(StatsError::InvalidInput(format!("window range [{min_window}, {max_window}] for length {n}")));
    }
    let mu = mean(series);
    let mut profile = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &v in series {
        acc += v - mu;
        profile.push(acc);
    }
    let mut fluctuations = Vec::new();
    for s in geometric_grid(min_window, max_window, MIN_SCALES) {
        let f = fluctuation(&profile, s);
        if f <= 0.0 || !f.is_finite() {
            return Err(StatsError::Degenerate("zero fluctuation (constant series?)"));
        }
        fluctuations.push((s, f));
    }
    let xs: Vec<f64> = fluctuations.iter().map(|(s, _)| (*s as f64).ln()).collect();
    let ys: Vec<f64> = fluctuations.iter().map(|(_, f)| f.ln()).collect();
    let fit = linear_fit(&xs, &ys).ok_or(StatsError::Degenerate("log-log fit"))?;
    if !(fit.slope > 0.0 && fit.slope < 1.0) {
        return Err(StatsError::InvalidInput(format!(
            "DFA slope {:.3} outside (0, 1): input is not a stationary increment series",
            fit.slope
        )));
    }
    Ok(HurstEstimate {
        hurst: fit.slope,
        min_window,
        max_window,
        r_squared: fit.r_squared,
        slope_se: fit.slope_se,
        fluctuations,
    })
}

fn fluctuation(profile: &[f64], s: usize) -> f64 {
    let n = profile.len();
    let segments = n / s;
    let sf = s as f64;
    // centred time index: sum t = 0, sum t^2 = s(s^2 - 1)/12
    let t0 = (sf - 1.0) / 2.0;
    let stt = sf * (sf * sf - 1.0) / 12.0;
    let mut total = 0.0;
    let mut count = 0usize;
    let starts = (0..segments).map(|i| i * s).chain((0..segments).map(|i| n - (i + 1) * s));
    for start in starts {
        let seg = &profile[start..start + s];
        let my = seg.iter().sum::<f64>() / sf;
        let mut sty = 0.0;
        let mut syy = 0.0;
        for (t, &y) in seg.iter().enumerate() {
            let dy = y - my;
            sty += (t as f64 - t0) * dy;
            syy += dy * dy;
        }
        let rss = (syy - sty * sty / stt).max(0.0);
        total += rss / sf;
        count += 1;
    }
    (total / count as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::fgn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn white_noise_is_half() {
        let e = dfa_hurst_default(&white(100_000, 1)).unwrap();
        assert!((e.hurst - 0.5).abs() < 0.03, "{}", e.hurst);
        assert!(e.fluctuations.len() >= 12);
        assert!(e.r_squared > 0.98);
    }

    #[test]
    fn fgn_recovers_hurst() {
        let x = fgn(1_000_000, 0.75, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let e = dfa_hurst_default(&x).unwrap();
        assert!((e.hurst - 0.75).abs() < 0.03, "{}", e.hurst);
    }

    #[test]
    fn invariant_under_shift_and_flip() {
        let x = fgn(20_000, 0.7, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let h = dfa_hurst_default(&x).unwrap().hurst;
        let shifted: Vec<f64> = x.iter().map(|v| v + 12.5).collect();
        let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((dfa_hurst_default(&shifted).unwrap().hurst - h).abs() < 1e-9);
        assert!((dfa_hurst_default(&flipped).unwrap().hurst - h).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_an_error() {
        assert!(matches!(dfa_hurst_default(&vec![2.0; 5000]), Err(StatsError::Degenerate(_))));
        assert!(matches!(dfa_hurst_default(&[1.0; 100]), Err(StatsError::TooFewSamples { .. })));
    }

    #[test]
    fn random_walk_is_rejected() {
        let w = white(10_000, 4);
        let walk: Vec<f64> = w.iter().scan(0.0, |a, v| { *a += v; Some(*a) }).collect();
        assert!(matches!(dfa_hurst_default(&walk), Err(StatsError::InvalidInput(_))));
    }
}
