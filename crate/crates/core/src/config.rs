//! Flat `key=value` configuration with section prefixes.
//!
//! ```text
//! # AZN at 3000 pence
//! flow.H_s=0.77
//! flow.T=1
//! sim.n_steps=2400000
//! calib.depth_floor=2
//! ```
//!
//! Unknown keys are errors. The model parameters may also be written
//! without their `flow.` prefix (`T=10`). [`Config::render`] writes every
//! key back in canonical form; loading that text reproduces the same
//! configuration exactly.

use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

use crate::calib::{CalibrationOptions, CancelEstimator};
use crate::flow::{HiddenOrderParams, Rounding};
use crate::sim::{CancelModel, SignModel, SimConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: cannot parse `{value}`: {message}")]
    Value { key: String, value: String, message: String },
    #[error("line {line}: `{key}` set twice")]
    Duplicate { line: usize, key: String },
    #[error("{0}")]
    Invalid(String),
}

/// Grid of a stability sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StabilityGrid {
    pub a_grid: Vec<f64>,
    pub p0_grid: Vec<f64>,
    pub tick_sizes: Vec<f64>,
    pub steps: u64,
}

/// Grid of a tail-exponent sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TailsGrid {
    pub alpha_grid: Vec<f64>,
    pub hurst_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub steps: u64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl Default for StabilityGrid {
    fn default() -> Self {
        Self {
            a_grid: linspace(0.3, 2.0, 10),
            p0_grid: linspace(500.0, 5000.0, 10),
            tick_sizes: vec![0.25, 0.5, 1.0],
            steps: 200_000,
        }
    }
}

impl Default for TailsGrid {
    fn default() -> Self {
        Self {
            alpha_grid: vec![0.9, 1.1, 1.3, 1.5, 1.7, 1.9],
            hurst_grid: vec![0.5, 0.75, 0.85],
            seeds: vec![1, 2, 3],
            steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Config {
    pub sim: SimConfig,
    /// Kept while the sign model is `fgn` so the order of keys is free.
    pub hidden: HiddenOrderParams,
    pub poisson_rate: f64,
    pub calib: CalibrationOptions,
    pub stability: StabilityGrid,
    pub tails: TailsGrid,
    /// Hill tail fraction for reported tail exponents.
    pub tail_fraction: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            hidden: HiddenOrderParams::default(),
            poisson_rate: 0.01,
            calib: CalibrationOptions::default(),
            stability: StabilityGrid::default(),
            tails: TailsGrid::default(),
            tail_fraction: 0.05,
        }
    }
}

const FLOW_ALIASES: [&str; 8] = ["H_s", "alpha_x", "sigma_x", "A", "B", "T", "p0", "seed"];

/// Every canonical key, in rendering order.
pub const KEYS: [&str; 44] = [
    "flow.H_s",
    "flow.alpha_x",
    "flow.sigma_x",
    "flow.A",
    "flow.B",
    "flow.T",
    "flow.p0",
    "flow.seed",
    "sim.n_steps",
    "sim.warmup",
    "sim.init_depth",
    "sim.init_spread_ticks",
    "sim.length_multiplier",
    "sim.record_events",
    "sim.depth_floor",
    "sim.rounding",
    "sim.signs",
    "sim.hidden_beta",
    "sim.hidden_concurrent",
    "sim.cancellation",
    "sim.poisson_rate",
    "sim.divergence_ceiling",
    "sim.divergence_sustain",
    "sim.growth_factor",
    "sim.divergence_min_level",
    "calib.tick",
    "calib.max_size",
    "calib.max_spread_ticks",
    "calib.same_second",
    "calib.stale_window",
    "calib.s0",
    "calib.s0_bins_per_decade",
    "calib.depth_floor",
    "calib.cancel_estimator",
    "calib.min_observations",
    "stats.tail_fraction",
    "sweep.a_grid",
    "sweep.p0_grid",
    "sweep.tick_sizes",
    "sweep.stability_steps",
    "sweep.alpha_grid",
    "sweep.hurst_grid",
    "sweep.seeds",
    "sweep.tails_steps",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), value: value.into(), message: e.to_string() })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: Display,
{
    let items: Vec<T> = value.split(',').map(|v| parse(key, v.trim())).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(ConfigError::Value { key: key.into(), value: value.into(), message: "empty list".into() });
    }
    Ok(items)
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn choice<T>(key: &str, value: &str, parsed: Option<T>, options: &str) -> Result<T, ConfigError> {
    parsed.ok_or_else(|| ConfigError::Value { key: key.into(), value: value.into(), message: format!("expected one of {options}") })
}

impl Config {
    /// Canonical form of `key`, resolving the bare model-parameter aliases.
    pub fn canonical(key: &str) -> Result<String, ConfigError> {
        let k = if FLOW_ALIASES.contains(&key) { format!("flow.{key}") } else { key.to_string() };
        if KEYS.contains(&k.as_str()) {
            Ok(k)
        } else {
            Err(ConfigError::UnknownKey(key.into()))
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = Self::canonical(key)?;
        let k = key.as_str();
        let v = value.trim();
        let flow = &mut self.sim.flow;
        match k {
            "flow.H_s" => flow.hurst = parse(k, v)?,
            "flow.alpha_x" => flow.alpha_x = parse(k, v)?,
            "flow.sigma_x" => flow.sigma_x = parse(k, v)?,
            "flow.A" => flow.cancel_scale = parse(k, v)?,
            "flow.B" => flow.imbalance_offset = parse(k, v)?,
            "flow.T" => flow.tick_size = parse(k, v)?,
            "flow.p0" => flow.p0 = parse(k, v)?,
            "flow.seed" => flow.seed = parse(k, v)?,
            "sim.n_steps" => self.sim.n_steps = parse(k, v)?,
            "sim.warmup" => self.sim.warmup = parse(k, v)?,
            "sim.init_depth" => self.sim.init_depth = parse(k, v)?,
            "sim.init_spread_ticks" => self.sim.init_spread_ticks = parse(k, v)?,
            "sim.length_multiplier" => self.sim.length_multiplier = parse(k, v)?,
            "sim.record_events" => self.sim.record_events = parse(k, v)?,
            "sim.depth_floor" => self.sim.depth_floor = parse(k, v)?,
            "sim.rounding" => self.sim.rounding = choice(k, v, Rounding::parse(v), "passive, nearest, floor")?,
            "sim.signs" => {
                self.sim.signs = match v {
                    "fgn" => SignModel::Fgn,
                    "hidden" => SignModel::HiddenOrder(self.hidden),
                    _ => return choice(k, v, None, "fgn, hidden"),
                }
            }
            "sim.hidden_beta" => self.hidden.beta = parse(k, v)?,
            "sim.hidden_concurrent" => self.hidden.concurrent = parse(k, v)?,
            "sim.cancellation" => {
                self.sim.cancellation = match v {
                    "conditional" => CancelModel::Conditional,
                    "poisson" => CancelModel::Poisson { rate: self.poisson_rate },
                    _ => return choice(k, v, None, "conditional, poisson"),
                }
            }
            "sim.poisson_rate" => self.poisson_rate = parse(k, v)?,
            "sim.divergence_ceiling" => self.sim.divergence.ceiling = parse(k, v)?,
            "sim.divergence_sustain" => self.sim.divergence.sustain = parse(k, v)?,
            "sim.growth_factor" => self.sim.divergence.growth_factor = parse(k, v)?,
            "sim.divergence_min_level" => self.sim.divergence.min_level = parse(k, v)?,
            "calib.tick" => self.calib.tick = if v == "auto" { None } else { Some(parse(k, v)?) },
            "calib.max_size" => self.calib.filter.max_size = parse(k, v)?,
            "calib.max_spread_ticks" => self.calib.filter.max_spread_ticks = parse(k, v)?,
            "calib.same_second" => self.calib.filter.same_second = parse(k, v)?,
            "calib.stale_window" => self.calib.filter.stale_window = parse(k, v)?,
            "calib.s0" => self.calib.s0 = parse(k, v)?,
            "calib.s0_bins_per_decade" => self.calib.pstar_bins.per_decade = parse(k, v)?,
            "calib.depth_floor" => self.calib.cancel_bins.depth_floor = parse(k, v)?,
            "calib.cancel_estimator" => {
                self.calib.cancel_estimator = choice(k, v, CancelEstimator::parse(v), "joint, factorized")?
            }
            "calib.min_observations" => self.calib.cancel_bins.min_observations = parse(k, v)?,
            "stats.tail_fraction" => self.tail_fraction = parse(k, v)?,
            "sweep.a_grid" => self.stability.a_grid = parse_list(k, v)?,
            "sweep.p0_grid" => self.stability.p0_grid = parse_list(k, v)?,
            "sweep.tick_sizes" => self.stability.tick_sizes = parse_list(k, v)?,
            "sweep.stability_steps" => self.stability.steps = parse(k, v)?,
            "sweep.alpha_grid" => self.tails.alpha_grid = parse_list(k, v)?,
            "sweep.hurst_grid" => self.tails.hurst_grid = parse_list(k, v)?,
            "sweep.seeds" => self.tails.seeds = parse_list(k, v)?,
            "sweep.tails_steps" => self.tails.steps = parse(k, v)?,
            _ => unreachable!("every canonical key is handled"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String, ConfigError> {
        let key = Self::canonical(key)?;
        let flow = &self.sim.flow;
        let s = &self.sim;
        Ok(match key.as_str() {
            "flow.H_s" => flow.hurst.to_string(),
            "flow.alpha_x" => flow.alpha_x.to_string(),
            "flow.sigma_x" => flow.sigma_x.to_string(),
            "flow.A" => flow.cancel_scale.to_string(),
            "flow.B" => flow.imbalance_offset.to_string(),
            "flow.T" => flow.tick_size.to_string(),
            "flow.p0" => flow.p0.to_string(),
            "flow.seed" => flow.seed.to_string(),
            "sim.n_steps" => s.n_steps.to_string(),
            "sim.warmup" => s.warmup.to_string(),
            "sim.init_depth" => s.init_depth.to_string(),
            "sim.init_spread_ticks" => s.init_spread_ticks.to_string(),
            "sim.length_multiplier" => s.length_multiplier.to_string(),
            "sim.record_events" => s.record_events.to_string(),
            "sim.depth_floor" => s.depth_floor.to_string(),
            "sim.rounding" => s.rounding.name().to_string(),
            "sim.signs" => match s.signs {
                SignModel::Fgn => "fgn",
                SignModel::HiddenOrder(_) => "hidden",
            }
            .to_string(),
            "sim.hidden_beta" => self.hidden.beta.to_string(),
            "sim.hidden_concurrent" => self.hidden.concurrent.to_string(),
            "sim.cancellation" => match s.cancellation {
                CancelModel::Conditional => "conditional",
                CancelModel::Poisson { .. } => "poisson",
            }
            .to_string(),
            "sim.poisson_rate" => self.poisson_rate.to_string(),
            "sim.divergence_ceiling" => s.divergence.ceiling.to_string(),
            "sim.divergence_sustain" => s.divergence.sustain.to_string(),
            "sim.growth_factor" => s.divergence.growth_factor.to_string(),
            "sim.divergence_min_level" => s.divergence.min_level.to_string(),
            "calib.tick" => self.calib.tick.map_or("auto".to_string(), |t| t.to_string()),
            "calib.max_size" => self.calib.filter.max_size.to_string(),
            "calib.max_spread_ticks" => self.calib.filter.max_spread_ticks.to_string(),
            "calib.same_second" => self.calib.filter.same_second.to_string(),
            "calib.stale_window" => self.calib.filter.stale_window.to_string(),
            "calib.s0" => self.calib.s0.to_string(),
            "calib.s0_bins_per_decade" => self.calib.pstar_bins.per_decade.to_string(),
            "calib.depth_floor" => self.calib.cancel_bins.depth_floor.to_string(),
            "calib.cancel_estimator" => self.calib.cancel_estimator.name().to_string(),
            "calib.min_observations" => self.calib.cancel_bins.min_observations.to_string(),
            "stats.tail_fraction" => self.tail_fraction.to_string(),
            "sweep.a_grid" => join(&self.stability.a_grid),
            "sweep.p0_grid" => join(&self.stability.p0_grid),
            "sweep.tick_sizes" => join(&self.stability.tick_sizes),
            "sweep.stability_steps" => self.stability.steps.to_string(),
            "sweep.alpha_grid" => join(&self.tails.alpha_grid),
            "sweep.hurst_grid" => join(&self.tails.hurst_grid),
            "sweep.seeds" => join(&self.tails.seeds),
            "sweep.tails_steps" => self.tails.steps.to_string(),
            _ => unreachable!("every canonical key is handled"),
        })
    }

    /// Apply `key=value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, message: format!("expected key=value, found `{line}`") })?;
            let key = Self::canonical(k.trim()).map_err(|e| ConfigError::Syntax { line: i + 1, message: e.to_string() })?;
            if !seen.insert(key.clone()) {
                return Err(ConfigError::Duplicate { line: i + 1, key });
            }
            self.set(&key, v).map_err(|e| ConfigError::Syntax { line: i + 1, message: e.to_string() })?;
        }
        self.resolve();
        Ok(())
    }

    /// Apply one `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("override `{kv}` is not key=value")))?;
        self.set(k.trim(), v)?;
        self.resolve();
        Ok(())
    }

    /// Push the stand-alone sign and cancellation parameters into the
    /// selected models.
    fn resolve(&mut self) {
        if let SignModel::HiddenOrder(_) = self.sim.signs {
            self.sim.signs = SignModel::HiddenOrder(self.hidden);
        }
        if let CancelModel::Poisson { .. } = self.sim.cancellation {
            self.sim.cancellation = CancelModel::Poisson { rate: self.poisson_rate };
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Every key in canonical form, one `key=value` per line.
    pub fn render(&self) -> String {
        KEYS.iter().map(|k| format!("{k}={}\n", self.get(k).expect("canonical key"))).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.calib.filter.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 0.1) {
            return Err(ConfigError::Invalid(format!("stats.tail_fraction {} not in (0, 0.1]", self.tail_fraction)));
        }
        Ok(())
    }
}
