//! Event-time price formation driven by the order-flow model.
//!
//! Each step places one order: its sign comes from the sign series, its
//! relative price from the Student placement distribution. The order either
//! executes against the opposite best or rests in the book, after which
//! every resting order is offered for cancellation.

mod sweep;

pub use sweep::{sweep_stability, sweep_tails, StabilityCell, StabilityMap, TailCell};

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{BookError, OrderBook, OrderId, Quotes, Removed, Side, TickGrid, DEFAULT_DEPTH_FLOOR};
use crate::events::{EventKind, EventSink, OrderEvent};
use crate::flow::{
    classify_order, limit_price_ticks, signs_fgn, signs_hidden_order, FlowError, FlowParams, HiddenOrderParams,
    OrderClass, Rounding, StudentSampler,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("book contract violated: {0}")]
    Book(#[from] BookError),
    #[error("event output failed: {0}")]
    Io(#[from] io::Error),
}

/// Where order signs come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SignModel {
    /// Signs of fractional Gaussian noise with the flow's Hurst exponent.
    Fgn,
    /// Hidden-order splitting with power-law sizes.
    HiddenOrder(HiddenOrderParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CancelModel {
    /// Probability depends on distance, imbalance and book size.
    Conditional,
    /// Every resting order is cancelled with the same probability per step.
    Poisson { rate: f64 },
}

/// Finite-time proxy for an unbounded book.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceGuard {
    /// Book size that counts as runaway.
    pub ceiling: usize,
    /// Steps the ceiling must be exceeded in a row before the run stops.
    pub sustain: u64,
    /// A run whose late-window mean book size exceeds its early-window mean
    /// by this factor is also judged divergent.
    pub growth_factor: f64,
    /// The growth test also needs the late-window mean to reach this many
    /// orders; small books fluctuate by factors of two without trending.
    pub min_level: usize,
}

impl Default for DivergenceGuard {
    fn default() -> Self {
        Self { ceiling: 50_000, sustain: 10_000, growth_factor: 2.0, min_level: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub flow: FlowParams,
    pub n_steps: u64,
    pub warmup: u64,
    /// Orders resting at each best quote at the start.
    pub init_depth: usize,
    pub init_spread_ticks: i64,
    /// Run length as a multiple of the order count of a reference dataset.
    pub length_multiplier: f64,
    pub record_events: bool,
    pub depth_floor: usize,
    pub rounding: Rounding,
    pub signs: SignModel,
    pub cancellation: CancelModel,
    pub divergence: DivergenceGuard,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            flow: FlowParams::azn(),
            n_steps: 2_400_000,
            warmup: 10_000,
            init_depth: 10,
            init_spread_ticks: 1,
            length_multiplier: 20.0,
            record_events: false,
            depth_floor: DEFAULT_DEPTH_FLOOR,
            rounding: Rounding::Passive,
            signs: SignModel::Fgn,
            cancellation: CancelModel::Conditional,
            divergence: DivergenceGuard::default(),
        }
    }
}

impl SimConfig {
    pub fn azn(n_steps: u64, seed: u64) -> Self {
        let mut c = Self { n_steps, ..Self::default() };
        c.flow.seed = seed;
        c
    }

    /// Step count giving `length_multiplier` times `reference_orders`
    /// placements after warmup.
    pub fn steps_for_reference(&self, reference_orders: u64) -> u64 {
        (self.length_multiplier * reference_orders as f64).round() as u64 + self.warmup
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.flow.validate()?;
        if self.n_steps <= self.warmup + 1 {
            return Err(SimError::Config(format!("n_steps ({}) must exceed warmup + 1 ({})", self.n_steps, self.warmup + 1)));
        }
        if self.init_depth < self.depth_floor.max(1) {
            return Err(SimError::Config(format!(
                "init_depth ({}) below the depth floor ({})",
                self.init_depth, self.depth_floor
            )));
        }
        if self.init_spread_ticks < 1 {
            return Err(SimError::Config(format!("init_spread_ticks ({}) must be >= 1", self.init_spread_ticks)));
        }
        if !(self.length_multiplier > 0.0) {
            return Err(SimError::Config("length_multiplier must be positive".into()));
        }
        if let SignModel::HiddenOrder(p) = self.signs {
            p.validate()?;
        }
        if let CancelModel::Poisson { rate } = self.cancellation {
            if !(0.0..=1.0).contains(&rate) {
                return Err(SimError::Config(format!("poisson cancellation rate {rate} not in [0, 1]")));
            }
        }
        if self.divergence.ceiling == 0 || !(self.divergence.growth_factor > 1.0) {
            return Err(SimError::Config("divergence ceiling must be positive and growth factor > 1".into()));
        }
        Ok(())
    }
}

/// Book at t = 0: `init_depth` orders on each best, `init_spread_ticks`
/// apart, with the ask on the grid price of `p0`.
pub fn init_book(config: &SimConfig) -> Result<OrderBook, SimError> {
    let flow = &config.flow;
    let grid = TickGrid::new(flow.tick_size)?;
    let ask = grid.round_to_tick(flow.p0)?;
    let bid = ask - config.init_spread_ticks;
    if bid < 1 {
        return Err(SimError::Config(format!(
            "p0 = {} leaves no room for a bid {} ticks below it",
            flow.p0, config.init_spread_ticks
        )));
    }
    let mut book = OrderBook::new(grid).with_depth_floor(config.depth_floor);
    for _ in 0..config.init_depth {
        book.place_limit(Side::Buy, bid, 0)?;
    }
    for _ in 0..config.init_depth {
        book.place_limit(Side::Sell, ask, 0)?;
    }
    Ok(book)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RemovalCause {
    Executed,
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lifetime {
    pub tau: u64,
    pub cause: RemovalCause,
}

/// What happened to the order placed in a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    Limit { id: OrderId, price_ticks: i64 },
    Market { filled: OrderId },
    /// Market order refused because the opposite side sits at the depth floor.
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub sign: Side,
    pub x: f64,
    /// Quotes before the order was placed.
    pub pre: Quotes,
    pub placement: Placement,
    pub cancellations: usize,
    /// Log midprice after placement and cancellations.
    pub post_mid: f64,
    pub n_tot: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub steps: u64,
    pub limit_orders: u64,
    pub market_orders: u64,
    /// Market orders refused by the depth floor.
    pub rejected_markets: u64,
    /// Limit prices that rounded onto the opposite best and executed.
    pub rounded_to_market: u64,
    pub cancellations: u64,
    /// Cancellations skipped by the depth floor.
    pub rejected_cancellations: u64,
    pub min_depth: usize,
    pub max_n_tot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Divergent { step: u64, reason: DivergenceReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceReason {
    Ceiling,
    Growth,
}

impl Verdict {
    pub fn is_divergent(&self) -> bool {
        matches!(self, Verdict::Divergent { .. })
    }
}

/// One step of a run, stepping through the book mutations in order.
pub struct Simulator<'a> {
    config: SimConfig,
    book: OrderBook,
    sampler: StudentSampler,
    rng: ChaCha8Rng,
    t: u64,
    diagnostics: Diagnostics,
    sink: Option<&'a mut dyn EventSink>,
    removals: Vec<(Removed, RemovalCause)>,
    candidates: Vec<OrderId>,
}

impl<'a> Simulator<'a> {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let book = init_book(&config)?;
        let sampler = StudentSampler::new(config.flow.sigma_x, config.flow.alpha_x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.flow.seed);
        // the sign series uses stream 0 of the same seed
        rng.set_stream(1);
        let min_depth = config.init_depth;
        Ok(Self {
            book,
            sampler,
            rng,
            t: 0,
            diagnostics: Diagnostics { min_depth, max_n_tot: 2 * min_depth, ..Diagnostics::default() },
            sink: None,
            removals: Vec::new(),
            candidates: Vec::new(),
            config,
        })
    }

    /// Send every book mutation, starting with the initial orders, to `sink`.
    pub fn with_sink(mut self, sink: &'a mut dyn EventSink) -> Result<Self, SimError> {
        let initial: Vec<_> = self.book.resting().cloned().collect();
        for o in initial {
            let e = OrderEvent {
                time: 0.0,
                kind: EventKind::Limit,
                order_id: o.id.0,
                side: o.side,
                price: self.book.grid().price(o.price_ticks),
                size: 1.0,
            };
            sink.record(&e)?;
        }
        self.sink = Some(sink);
        Ok(self)
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// Orders removed during the last step.
    pub fn removals(&self) -> &[(Removed, RemovalCause)] {
        &self.removals
    }

    fn emit(&mut self, kind: EventKind, order_id: OrderId, side: Side, price_ticks: i64) -> Result<(), SimError> {
        if let Some(sink) = self.sink.as_mut() {
            let e = OrderEvent {
                time: self.t as f64,
                kind,
                order_id: order_id.0,
                side,
                price: self.book.grid().price(price_ticks),
                size: 1.0,
            };
            sink.record(&e)?;
        }
        Ok(())
    }

    /// Advance one event: place an order of the given sign, then run the
    /// cancellation sweep.
    pub fn step(&mut self, sign: Side) -> Result<StepRecord, SimError> {
        self.t += 1;
        self.removals.clear();
        let now = self.t;
        let pre = self.book.quotes()?;
        let x = self.sampler.sample(&mut self.rng);
        let grid = *self.book.grid();
        let midprice = pre.mid.exp();
        let class = match classify_order(x, pre.spread, midprice, &grid) {
            OrderClass::Market => None,
            OrderClass::Limit(x) => {
                let (bid, ask) = (self.book.best_bid_ticks().unwrap(), self.book.best_ask_ticks().unwrap());
                let ticks = limit_price_ticks(sign, x, &pre, bid, ask, &grid, self.config.rounding);
                if ticks.is_none() {
                    self.diagnostics.rounded_to_market += 1;
                }
                ticks
            }
        };
        let placement = match class {
            Some(price_ticks) => {
                let id = self.book.place_limit(sign, price_ticks, now)?;
                self.diagnostics.limit_orders += 1;
                self.emit(EventKind::Limit, id, sign, price_ticks)?;
                Placement::Limit { id, price_ticks }
            }
            None => match self.book.execute_market(sign, now) {
                Ok(removed) => {
                    self.diagnostics.market_orders += 1;
                    let filled = removed.order.id;
                    self.emit(EventKind::Market, filled, sign, removed.order.price_ticks)?;
                    self.removals.push((removed, RemovalCause::Executed));
                    Placement::Market { filled }
                }
                Err(BookError::DepthFloor { .. }) => {
                    self.diagnostics.rejected_markets += 1;
                    Placement::Rejected
                }
                Err(e) => return Err(e.into()),
            },
        };
        let cancellations = self.cancellation_sweep()?;
        let post = self.book.quotes()?;
        let d = &mut self.diagnostics;
        d.steps += 1;
        d.min_depth = d.min_depth.min(self.book.n_buy()).min(self.book.n_sell());
        d.max_n_tot = d.max_n_tot.max(self.book.n_tot());
        Ok(StepRecord {
            t: now,
            sign,
            x,
            pre,
            placement,
            cancellations,
            post_mid: post.mid,
            n_tot: self.book.n_tot(),
        })
    }

    /// Offer every resting order for cancellation.
    ///
    /// Probabilities use the book state at the start of the sweep. Orders
    /// are visited in id order by thinning: candidate gaps are geometric at
    /// the largest probability any order can have, and each candidate is
    /// kept with its own probability divided by that bound. This is the
    /// same Bernoulli trial per order at a cost proportional to the number
    /// of cancellations rather than the book size.
    fn cancellation_sweep(&mut self) -> Result<usize, SimError> {
        let n_tot = self.book.n_tot();
        let quotes = self.book.quotes()?;
        let nt = n_tot as f64;
        let imb = [self.book.n_buy() as f64 / nt, self.book.n_sell() as f64 / nt];
        let (a, b) = (self.config.flow.cancel_scale, self.config.flow.imbalance_offset);
        let prob = |side: Side, y: f64| -> f64 {
            let n_imb = imb[(side == Side::Sell) as usize];
            crate::flow::cancel_prob_unchecked(y, n_imb, nt, a, b)
        };
        let p_max = match self.config.cancellation {
            CancelModel::Conditional => (a * (imb[0].max(imb[1]) + b) / nt).min(1.0),
            CancelModel::Poisson { rate } => rate,
        };
        self.candidates.clear();
        if p_max <= 0.0 {
            return Ok(0);
        }
        let mut k = 0usize;
        loop {
            if p_max < 1.0 {
                let u: f64 = 1.0 - self.rng.random::<f64>();
                let gap = (u.ln() / (-p_max).ln_1p()).floor();
                if gap >= (n_tot - k) as f64 {
                    break;
                }
                k += gap as usize;
            }
            if k >= n_tot {
                break;
            }
            let order = self.book.nth_resting(k).expect("k < n_tot");
            let keep = match self.config.cancellation {
                CancelModel::Conditional => {
                    // initial bids were placed against an empty ask side:
                    // delta0 = 0, distance >= 1 tick, so y = inf
                    let y = order.relative_distance(&quotes);
                    let p = prob(order.side, y);
                    p >= p_max || self.rng.random::<f64>() * p_max < p
                }
                CancelModel::Poisson { .. } => true,
            };
            if keep {
                self.candidates.push(order.id);
            }
            k += 1;
        }
        let mut done = 0;
        for i in 0..self.candidates.len() {
            let id = self.candidates[i];
            match self.book.cancel_order(id, self.t) {
                Ok(removed) => {
                    done += 1;
                    let (side, ticks) = (removed.order.side, removed.order.price_ticks);
                    self.emit(EventKind::Cancel, id, side, ticks)?;
                    self.removals.push((removed, RemovalCause::Cancelled));
                }
                Err(BookError::DepthFloor { .. }) => self.diagnostics.rejected_cancellations += 1,
                Err(e) => return Err(e.into()),
            }
        }
        self.diagnostics.cancellations += done as u64;
        Ok(done)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    /// Log midprice changes per recorded step.
    pub returns: Vec<f64>,
    /// Log spread before each recorded placement, aligned with `returns`.
    pub spreads: Vec<f64>,
    pub transacted: Vec<bool>,
    pub n_tot: Vec<u32>,
    pub lifetimes: Vec<Lifetime>,
    pub diagnostics: Diagnostics,
    /// Executed market orders per recorded step.
    pub transaction_rate: f64,
    pub mean_n_tot: f64,
    pub verdict: Verdict,
}

impl SimOutput {
    pub fn cancelled_lifetimes(&self) -> Vec<u64> {
        self.lifetimes.iter().filter(|l| l.cause == RemovalCause::Cancelled).map(|l| l.tau).collect()
    }

    pub fn abs_returns(&self) -> Vec<f64> {
        self.returns.iter().map(|r| r.abs()).collect()
    }
}

pub fn sign_series(config: &SimConfig) -> Result<Vec<i8>, SimError> {
    let n = config.n_steps as usize;
    let seed = config.flow.seed;
    Ok(match config.signs {
        SignModel::Fgn => signs_fgn(n, config.flow.hurst, seed)?,
        SignModel::HiddenOrder(p) => signs_hidden_order(n, p, seed)?,
    })
}

pub fn run(config: &SimConfig) -> Result<SimOutput, SimError> {
    run_inner(config, None)
}

/// Run while streaming every book mutation to `sink`.
pub fn run_with_events(config: &SimConfig, sink: &mut dyn EventSink) -> Result<SimOutput, SimError> {
    run_inner(config, Some(sink))
}

fn run_inner(config: &SimConfig, sink: Option<&mut dyn EventSink>) -> Result<SimOutput, SimError> {
    let mut sim = Simulator::new(config.clone())?;
    if let Some(sink) = sink {
        sim = sim.with_sink(sink)?;
    }
    let signs = sign_series(config)?;
    let recorded = (config.n_steps - config.warmup) as usize;
    let mut returns = Vec::with_capacity(recorded);
    let mut spreads = Vec::with_capacity(recorded);
    let mut transacted = Vec::with_capacity(recorded);
    let mut n_tot = Vec::with_capacity(recorded);
    let mut lifetimes = Vec::new();
    let mut prev_mid = None;
    let mut over_ceiling = 0u64;
    let mut verdict = Verdict::Bounded;
    let mut executed = 0u64;
    for &s in &signs {
        let rec = sim.step(Side::from_sign(s))?;
        if rec.n_tot > config.divergence.ceiling {
            over_ceiling += 1;
            if over_ceiling >= config.divergence.sustain {
                verdict = Verdict::Divergent { step: rec.t, reason: DivergenceReason::Ceiling };
                break;
            }
        } else {
            over_ceiling = 0;
        }
        if rec.t <= config.warmup {
            continue;
        }
        if let Some(prev) = prev_mid {
            let market = matches!(rec.placement, Placement::Market { .. });
            executed += market as u64;
            returns.push(rec.post_mid - prev);
            spreads.push(rec.pre.spread);
            transacted.push(market);
            n_tot.push(rec.n_tot as u32);
        }
        prev_mid = Some(rec.post_mid);
        for (removed, cause) in sim.removals() {
            lifetimes.push(Lifetime { tau: removed.lifetime(), cause: *cause });
        }
    }
    let mean_n_tot = if n_tot.is_empty() { 0.0 } else { n_tot.iter().map(|&v| v as f64).sum::<f64>() / n_tot.len() as f64 };
    if !verdict.is_divergent() && grew(&n_tot, &config.divergence) {
        verdict = Verdict::Divergent { step: config.n_steps, reason: DivergenceReason::Growth };
    }
    let transaction_rate = if returns.is_empty() { 0.0 } else { executed as f64 / returns.len() as f64 };
    Ok(SimOutput {
        returns,
        spreads,
        transacted,
        n_tot,
        lifetimes,
        diagnostics: sim.diagnostics.clone(),
        transaction_rate,
        mean_n_tot,
        verdict,
    })
}

/// Mean book size over the last quarter against the second quarter.
fn grew(n_tot: &[u32], guard: &DivergenceGuard) -> bool {
    let q = n_tot.len() / 4;
    if q == 0 {
        return false;
    }
    let mean = |s: &[u32]| s.iter().map(|&v| v as f64).sum::<f64>() / s.len() as f64;
    let late = mean(&n_tot[3 * q..]);
    late >= guard.min_level as f64 && late > guard.growth_factor * mean(&n_tot[q..2 * q])
}
