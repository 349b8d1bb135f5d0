use serde::Serialize;

use super::{hill_window, DensityBin, EmpiricalDistribution, StatsError, TailEstimate};

/// Lifetimes below this are excluded from the tail fit.
pub const LIFETIME_TAIL_START: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeDistribution {
    pub count: usize,
    pub mean: f64,
    /// Rate of the geometric distribution with the same mean.
    pub poisson_lambda: f64,
    pub density: Vec<DensityBin>,
    /// Exponent of the CCDF tail (density ~ tau^-(1+gamma_c)) over tau >= 10.
    pub gamma_c: Option<TailEstimate>,
    /// Tail exponents with the fit starting at 10, 20 and 40; a power law
    /// gives similar values, an exponential tail a steep increase.
    pub gamma_c_by_start: Vec<(f64, f64)>,
    pub gamma_c_stable: bool,
}

pub fn lifetime_distribution(lifetimes: &[u64]) -> Result<LifetimeDistribution, StatsError> {
    const MIN: usize = 1000;
    if lifetimes.len() < MIN {
        return Err(StatsError::TooFewSamples { need: MIN, got: lifetimes.len() });
    }
    let taus: Vec<f64> = lifetimes.iter().map(|&t| t as f64).collect();
    let mean = taus.iter().sum::<f64>() / taus.len() as f64;
    let positive: Vec<f64> = taus.iter().copied().filter(|&t| t > 0.0).collect();
    let density = if positive.is_empty() {
        Vec::new()
    } else {
        EmpiricalDistribution::new(positive).log_binned_density(8)
    };
    let max = taus.iter().copied().fold(0.0, f64::max);
    let gamma_c = hill_window(&taus, LIFETIME_TAIL_START, max.max(LIFETIME_TAIL_START * 2.0)).ok();
    let gamma_c_by_start: Vec<(f64, f64)> = [10.0, 20.0, 40.0]
        .into_iter()
        .filter_map(|lo| hill_window(&taus, lo, max.max(lo * 2.0)).ok().map(|e| (lo, e.alpha)))
        .collect();
    let gamma_c_stable = gamma_c_by_start.len() == 3 && {
        let a: Vec<f64> = gamma_c_by_start.iter().map(|p| p.1).collect();
        let hi = a.iter().copied().fold(f64::MIN, f64::max);
        let lo = a.iter().copied().fold(f64::MAX, f64::min);
        hi / lo <= 1.25
    };
    Ok(LifetimeDistribution {
        count: lifetimes.len(),
        mean,
        poisson_lambda: if mean > 0.0 { 1.0 / mean } else { f64::INFINITY },
        density,
        gamma_c,
        gamma_c_by_start,
        gamma_c_stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometric_lifetimes_are_flagged() {
        // P(tau) = lambda (1 - lambda)^(tau - 1)
        let lambda: f64 = 0.04;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let taus: Vec<u64> = (0..200_000)
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>();
                (u.ln() / (1.0 - lambda).ln()).ceil().max(1.0) as u64
            })
            .collect();
        let d = lifetime_distribution(&taus).unwrap();
        assert!((d.poisson_lambda - lambda).abs() < 0.002, "{}", d.poisson_lambda);
        assert!(!d.gamma_c_stable, "{:?}", d.gamma_c_by_start);
    }

    #[test]
    fn power_law_fixture_recovered() {
        // density ~ tau^-(1 + 1.1) above 1, integer lifetimes
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let taus: Vec<u64> = (0..200_000)
            .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 1.1).floor() as u64)
            .collect();
        let d = lifetime_distribution(&taus).unwrap();
        let g = d.gamma_c.unwrap().alpha;
        assert!((g - 1.1).abs() < 0.2, "{g}");
        assert!(d.gamma_c_stable, "{:?}", d.gamma_c_by_start);
        let total: f64 = d.density.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_lifetimes() {
        assert!(lifetime_distribution(&[3; 10]).is_err());
    }
}
