use rayon::prelude::*;
use serde::Serialize;

use super::{run, SimConfig, SimError, Verdict};
use crate::stats::hill_estimator;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCell {
    pub tick_size: f64,
    pub cancel_scale: f64,
    pub p0: f64,
    pub divergent: bool,
    pub verdict: Verdict,
    pub mean_n_tot: f64,
    pub max_n_tot: usize,
    pub steps: u64,
}

/// Verdicts over an (A, p0) grid for each tick size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityMap {
    pub tick_sizes: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub p0_grid: Vec<f64>,
    /// Row-major over (tick, A, p0).
    pub cells: Vec<StabilityCell>,
}

impl StabilityMap {
    pub fn cell(&self, tick: usize, a: usize, p0: usize) -> &StabilityCell {
        &self.cells[(tick * self.a_grid.len() + a) * self.p0_grid.len() + p0]
    }

    /// Divergence flags indexed `[a][p0]` for one tick size.
    pub fn divergent_mask(&self, tick: usize) -> Vec<Vec<bool>> {
        (0..self.a_grid.len())
            .map(|a| (0..self.p0_grid.len()).map(|p| self.cell(tick, a, p).divergent).collect())
            .collect()
    }

    pub fn divergent_count(&self, tick: usize) -> usize {
        self.divergent_mask(tick).iter().flatten().filter(|&&d| d).count()
    }

    /// True when the divergent cells form a down-set in both A and p0: every
    /// cell below or left of a divergent cell is divergent too. This is a
    /// single connected region touching the small-A, small-p0 corner
    /// (or empty).
    pub fn is_lower_left(&self, tick: usize) -> bool {
        let m = self.divergent_mask(tick);
        for a in 0..m.len() {
            for p in 0..m[a].len() {
                if m[a][p] && ((a > 0 && !m[a - 1][p]) || (p > 0 && !m[a][p - 1])) {
                    return false;
                }
            }
        }
        true
    }

    /// True when each tick size's divergent set contains that of the next
    /// smaller tick size (`tick_sizes` ascending).
    pub fn grows_with_tick(&self) -> bool {
        (1..self.tick_sizes.len()).all(|t| {
            let (lo, hi) = (self.divergent_mask(t - 1), self.divergent_mask(t));
            lo.iter().flatten().zip(hi.iter().flatten()).all(|(&l, &h)| !l || h)
        })
    }
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool")
}

/// Run every (T, A, p0) combination for `steps` steps. Every cell uses the
/// base seed, so cells differ only in their parameters.
pub fn sweep_stability(
    base: &SimConfig,
    a_grid: &[f64],
    p0_grid: &[f64],
    tick_sizes: &[f64],
    steps: u64,
    jobs: usize,
) -> Result<StabilityMap, SimError> {
    if a_grid.is_empty() || p0_grid.is_empty() || tick_sizes.is_empty() {
        return Err(SimError::Config("stability sweep needs nonempty grids".into()));
    }
    let mut configs = Vec::new();
    for &t in tick_sizes {
        for &a in a_grid {
            for &p0 in p0_grid {
                let mut c = base.clone();
                c.n_steps = steps;
                c.warmup = c.warmup.min(steps / 10);
                c.flow.tick_size = t;
                c.flow.cancel_scale = a;
                c.flow.p0 = p0;
                c.flow.seed = base.flow.seed;
                c.validate()?;
                configs.push(c);
            }
        }
    }
    let cells = pool(jobs).install(|| {
        configs
            .par_iter()
            .map(|c| {
                let out = run(c)?;
                Ok(StabilityCell {
                    tick_size: c.flow.tick_size,
                    cancel_scale: c.flow.cancel_scale,
                    p0: c.flow.p0,
                    divergent: out.verdict.is_divergent(),
                    verdict: out.verdict,
                    mean_n_tot: out.mean_n_tot,
                    max_n_tot: out.diagnostics.max_n_tot,
                    steps: out.diagnostics.steps,
                })
            })
            .collect::<Result<Vec<_>, SimError>>()
    })?;
    Ok(StabilityMap { tick_sizes: tick_sizes.to_vec(), a_grid: a_grid.to_vec(), p0_grid: p0_grid.to_vec(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCell {
    pub hurst: f64,
    pub alpha_x: f64,
    pub seed: u64,
    /// Hill exponent of |r|, also for divergent runs (check `verdict`);
    /// absent when the tail is degenerate.
    pub alpha_r: Option<f64>,
    pub verdict: Verdict,
}

/// Return-tail exponent over an (H_s, alpha_x) grid and several seeds.
pub fn sweep_tails(
    base: &SimConfig,
    alpha_grid: &[f64],
    hurst_grid: &[f64],
    seeds: &[u64],
    tail_fraction: f64,
    jobs: usize,
) -> Result<Vec<TailCell>, SimError> {
    let mut configs = Vec::new();
    for &h in hurst_grid {
        for &ax in alpha_grid {
            for &seed in seeds {
                let mut c = base.clone();
                c.flow.hurst = h;
                c.flow.alpha_x = ax;
                c.flow.seed = seed;
                c.validate()?;
                configs.push(c);
            }
        }
    }
    pool(jobs).install(|| {
        configs
            .par_iter()
            .map(|c| {
                let out = run(c)?;
                let alpha_r = hill_estimator(&out.returns, tail_fraction).ok().map(|e| e.alpha);
                Ok(TailCell { hurst: c.flow.hurst, alpha_x: c.flow.alpha_x, seed: c.flow.seed, alpha_r, verdict: out.verdict })
            })
            .collect()
    })
}
