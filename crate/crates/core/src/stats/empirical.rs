use serde::Serialize;

use super::{variance_plot_se, StatsError};

/// Sorted sample with CCDF and log-binned density.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub density: f64,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.retain(|v| !v.is_nan());
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `P(X >= x)`.
    pub fn ccdf(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        let below = self.sorted.partition_point(|&v| v < x);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    /// Value below which a fraction `q` of the sample lies.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let i = ((q * n as f64).floor() as usize).min(n - 1);
        self.sorted[i]
    }

    /// `(x, P(X >= x))` at every distinct sample value.
    pub fn ccdf_points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.sorted.len() {
            let v = self.sorted[i];
            out.push((v, (self.sorted.len() - i) as f64 / n));
            while i < self.sorted.len() && self.sorted[i] == v {
                i += 1;
            }
        }
        out
    }

    /// Density on logarithmically spaced bins over the positive samples,
    /// normalised by the total sample count.
    pub fn log_binned_density(&self, bins_per_decade: usize) -> Vec<DensityBin> {
        let positive: &[f64] = &self.sorted[self.sorted.partition_point(|&v| v <= 0.0)..];
        if positive.is_empty() {
            return Vec::new();
        }
        let (lo, hi) = (positive[0], positive[positive.len() - 1]);
        let step = 10f64.powf(1.0 / bins_per_decade as f64);
        let n = self.sorted.len() as f64;
        let mut bins = Vec::new();
        let mut edge = lo;
        let mut i = 0;
        loop {
            let next = edge * step;
            let last = next > hi;
            let start = i;
            while i < positive.len() && (positive[i] < next || last) {
                i += 1;
            }
            let count = i - start;
            if count > 0 {
                let upper = if last { next.max(hi) } else { next };
                bins.push(DensityBin { lo: edge, hi: upper, count, density: count as f64 / n / (upper - edge) });
            }
            if last {
                break;
            }
            edge = next;
        }
        bins
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    /// Variance-plot standard errors; absent for series shorter than 10^4.
    pub mean_se: Option<f64>,
    pub std_dev_se: Option<f64>,
}

pub fn summarize(samples: &[f64]) -> Result<Summary, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::TooFewSamples { need: 1, got: 0 });
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std_dev = var.sqrt();
    let mean_se = variance_plot_se(samples).ok().map(|v| v.se);
    let std_dev_se = if std_dev > 0.0 {
        let sq: Vec<f64> = samples.iter().map(|v| (v - mean).powi(2)).collect();
        // delta method: se(sigma) = se(sigma^2) / (2 sigma)
        variance_plot_se(&sq).ok().map(|v| v.se / (2.0 * std_dev))
    } else {
        mean_se.map(|_| 0.0)
    };
    Ok(Summary { n, mean, std_dev, mean_se, std_dev_se })
}
