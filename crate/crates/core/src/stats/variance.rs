//! Standard error of a sample mean under long memory (variance-plot method).
//!
//! Block means are computed at geometrically spaced block sizes `m`. For a
//! series with Hurst exponent H the variance of block means scales as
//! `m^(2H-2)`. A least-squares line through ln Var vs ln m, from `m = 10` up
//! to blocks that still leave 20 of them, is extrapolated to `m = n`, the
//! block that is the whole sample; its square root is the standard error of
//! the mean. Points are weighted by blocks - 1, since ln Var from k blocks
//! has variance about 2/(k-1). Fitting only the top decade left the slope
//! so loose that half of IID samples of 2e5 missed sigma/sqrt(n) by 20%.

use serde::Serialize;

use super::{geometric_grid, mean, StatsError};

const MIN_LEN: usize = 10_000;
/// Fewest blocks a block size may leave; fixes the largest block size.
const MIN_BLOCKS: usize = 20;
const MIN_BLOCK: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariancePlot {
    pub se: f64,
    /// Slope of ln Var(block mean) vs ln m; -1 for short memory.
    pub slope: f64,
    /// `1 + slope / 2`.
    pub hurst: f64,
    /// sigma / sqrt(n), the IID answer, for comparison.
    pub naive_se: f64,
    /// (block size, variance of block means).
    pub points: Vec<(usize, f64)>,
}

pub fn variance_plot_se(series: &[f64]) -> Result<VariancePlot, StatsError> {
    let n = series.len();
    if n < MIN_LEN {
        return Err(StatsError::TooFewSamples { need: MIN_LEN, got: n });
    }
    let mu = mean(series);
    let var = series.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64;
    let naive_se = (var / n as f64).sqrt();
    if series.iter().all(|&v| v == series[0]) {
        return Ok(VariancePlot { se: 0.0, slope: -1.0, hurst: 0.5, naive_se, points: Vec::new() });
    }
    let m_max = n / MIN_BLOCKS;
    let points: Vec<(usize, f64)> = geometric_grid(MIN_BLOCK, m_max, 24)
        .into_iter()
        .map(|m| (m, block_mean_variance(series, m)))
        .filter(|(_, v)| *v > 0.0)
        .collect();
    let fit = weighted_fit(&points, n).ok_or(StatsError::Degenerate("variance plot has too few points"))?;
    let (intercept, slope) = fit;
    let se = (intercept + slope * (n as f64).ln()).exp().sqrt();
    Ok(VariancePlot { se, slope, hurst: 1.0 + slope / 2.0, naive_se, points })
}

/// (intercept, slope) of ln Var on ln m, weights n/m - 1.
fn weighted_fit(points: &[(usize, f64)], n: usize) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let rows: Vec<(f64, f64, f64)> =
        points.iter().map(|&(m, v)| ((m as f64).ln(), v.ln(), (n / m - 1) as f64)).collect();
    let w: f64 = rows.iter().map(|r| r.2).sum();
    let mx = rows.iter().map(|r| r.0 * r.2).sum::<f64>() / w;
    let my = rows.iter().map(|r| r.1 * r.2).sum::<f64>() / w;
    let sxx: f64 = rows.iter().map(|r| r.2 * (r.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = rows.iter().map(|r| r.2 * (r.0 - mx) * (r.1 - my)).sum::<f64>() / sxx;
    Some((my - slope * mx, slope))
}

fn block_mean_variance(series: &[f64], m: usize) -> f64 {
    let means: Vec<f64> = series.chunks_exact(m).map(mean).collect();
    let k = means.len();
    let mu = mean(&means);
    means.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (k - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::fgn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn iid_matches_naive_standard_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v = variance_plot_se(&x).unwrap();
        assert!((v.se / v.naive_se - 1.0).abs() < 0.2, "{} vs {}", v.se, v.naive_se);
    }

    #[test]
    fn long_memory_inflates_error() {
        let x = fgn(200_000, 0.8, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let v = variance_plot_se(&x).unwrap();
        assert!(v.se > v.naive_se * 3.0, "{} vs {}", v.se, v.naive_se);
        assert!((v.hurst - 0.8).abs() < 0.05, "{}", v.hurst);
    }

    #[test]
    fn constant_series_has_zero_error() {
        let v = variance_plot_se(&vec![4.2; 20_000]).unwrap();
        assert_eq!(v.se, 0.0);
        assert!(matches!(variance_plot_se(&[1.0; 100]), Err(StatsError::TooFewSamples { .. })));
    }
}
