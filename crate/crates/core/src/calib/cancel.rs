use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use serde::Serialize;

use super::load::{EventLog, Replay};
use super::CalibError;
use std::collections::HashMap;

use crate::book::{OrderBook, OrderId, Quotes, Side};
use crate::events::{Clock, EventKind};
use crate::stats::linear_fit;

/// Histogram layout for the three conditional curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CancelBins {
    /// Linear bins of `y` on `[0, y_max]`, plus one overflow bin.
    pub y_bins: usize,
    pub y_max: f64,
    /// Linear bins of `n_imb` on `[0, 1]`.
    pub imb_bins: usize,
    /// Logarithmic bins of `n_tot` per decade.
    pub ntot_per_decade: usize,
    /// Bins with fewer order observations are left out of the fits.
    pub min_observations: u64,
    /// Sides holding this many orders or fewer are skipped: a simulator
    /// with a depth floor never cancels there. 0 for market data.
    pub depth_floor: usize,
}

impl Default for CancelBins {
    fn default() -> Self {
        Self { y_bins: 40, y_max: 4.0, imb_bins: 20, ntot_per_decade: 10, min_observations: 1000, depth_floor: 0 }
    }
}

/// One bin of `P(C | v)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub lo: f64,
    pub hi: f64,
    /// Mean of the conditioning variable over the bin's observations.
    pub mean: f64,
    pub observations: u64,
    pub cancels: u64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CancellationFit {
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    #[serde(rename = "K3")]
    pub k3: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "P_C")]
    pub p_c: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// Free log-log slope of `P(C | n_tot)`; the fit of `K3` pins it to -1.
    pub ntot_slope: f64,
    pub ntot_slope_se: f64,
    pub cancels: u64,
    pub observations: u64,
    /// Cancellations that no placement snapshot covered.
    pub unattributed: u64,
    pub joint: JointCancelFit,
    pub curve_y: Vec<CurvePoint>,
    pub curve_imb: Vec<CurvePoint>,
    pub curve_ntot: Vec<CurvePoint>,
}

/// `(A, B)` fitted jointly to every observation under the model's own
/// per-order law `A (1 - e^-y) (n_imb + B) / n_tot`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointCancelFit {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub log_likelihood: f64,
}

/// `A = K1 K2 K3 / P(C)^2`.
pub fn assemble_scale(k1: f64, k2: f64, k3: f64, p_c: f64) -> f64 {
    k1 * k2 * k3 / (p_c * p_c)
}

/// Sufficient statistics for the joint likelihood. With
/// `p = A u (m + B)`, `u = (1 - e^-y) / n_tot`, `m = n_imb`, the sum of
/// `ln(1 - p)` over all observations is expanded to third order in `p`,
/// which needs `sum u^k m^j` for `k <= 3`, `j <= k`; the cancelled
/// observations are kept whole.
#[derive(Debug, Clone, Default)]
struct JointStats {
    moments: [[f64; 4]; 4],
    cancelled: Vec<(f64, f64)>,
}

impl JointStats {
    #[cfg(test)]
    fn observe(&mut self, u: f64, m: f64, weight: u64) {
        let mut uk = weight as f64;
        for k in 1..4 {
            uk *= u;
            let mut mj = 1.0;
            for j in 0..=k {
                self.moments[k][j] += uk * mj;
                mj *= m;
            }
        }
    }

    fn log_likelihood(&self, a: f64, b: f64) -> f64 {
        let mut all = 0.0;
        let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
        for k in 1..4 {
            let s: f64 = (0..=k).map(|j| binom[k][j] * b.powi((k - j) as i32) * self.moments[k][j]).sum();
            all -= a.powi(k as i32) * s / k as f64;
        }
        let mut cancelled = 0.0;
        for &(u, m) in &self.cancelled {
            let p = a * u * (m + b);
            if !(p > 0.0 && p < 1.0) {
                return f64::NEG_INFINITY;
            }
            cancelled += p.ln() - (-p).ln_1p();
        }
        all + cancelled
    }
}

struct JointCost<'a>(&'a JointStats);

impl CostFunction for JointCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        let ll = self.0.log_likelihood(p[0].exp(), p[1]);
        Ok(if ll.is_finite() { -ll } else { f64::INFINITY })
    }
}

fn fit_joint(stats: &JointStats) -> Result<JointCancelFit, CalibError> {
    let simplex = vec![vec![0.0, 0.5], vec![0.5, 0.5], vec![0.0, 1.0]];
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-10).map_err(|e| CalibError::Fit(e.to_string()))?;
    let res = Executor::new(JointCost(stats), solver)
        .configure(|s| s.max_iters(2000))
        .run()
        .map_err(|e| CalibError::Fit(e.to_string()))?;
    let state = res.state();
    let p = state.get_best_param().expect("simplex keeps a best point");
    if !state.get_best_cost().is_finite() {
        return Err(CalibError::Fit(format!("joint cancellation likelihood not finite at {p:?}")));
    }
    Ok(JointCancelFit { a: p[0].exp(), b: p[1], log_likelihood: -state.get_best_cost() })
}

#[derive(Debug, Clone, Default)]
struct Hist {
    obs: Vec<u64>,
    cancels: Vec<u64>,
    sum: Vec<f64>,
}

impl Hist {
    fn new(n: usize) -> Self {
        Self { obs: vec![0; n], cancels: vec![0; n], sum: vec![0.0; n] }
    }

    fn observe(&mut self, bin: usize, value: f64, weight: u64) {
        self.obs[bin] += weight;
        self.sum[bin] += value * weight as f64;
    }

    fn points(&self, edges: impl Fn(usize) -> (f64, f64)) -> Vec<CurvePoint> {
        (0..self.obs.len())
            .filter(|&k| self.obs[k] > 0)
            .map(|k| {
                let (lo, hi) = edges(k);
                CurvePoint {
                    lo,
                    hi,
                    mean: self.sum[k] / self.obs[k] as f64,
                    observations: self.obs[k],
                    cancels: self.cancels[k],
                    p: self.cancels[k] as f64 / self.obs[k] as f64,
                }
            })
            .collect()
    }
}

fn side_index(side: Side) -> usize {
    (side == Side::Sell) as usize
}

/// `y` of an order at `log_price` placed `delta0` from the opposite best,
/// when that best is at `opposite`.
#[inline]
fn relative_distance(side: usize, opposite: f64, log_price: f64, delta0: f64) -> f64 {
    let d = if side == 0 { opposite - log_price } else { log_price - opposite };
    d / delta0
}

/// Observation sums over the resting orders of one side:
/// `g[k] = sum (1 - e^-y)^k` and a histogram of `y`. Orders placed while the
/// opposite side was empty have no `y` and are left out.
#[derive(Debug, Clone, PartialEq)]
struct SideSums {
    count: usize,
    g: [f64; 4],
    y_obs: Vec<u64>,
    y_sum: Vec<f64>,
}

impl SideSums {
    fn new(bins: usize) -> Self {
        Self { count: 0, g: [0.0; 4], y_obs: vec![0; bins], y_sum: vec![0.0; bins] }
    }

    fn clear(&mut self) {
        self.count = 0;
        self.g = [0.0; 4];
        self.y_obs.fill(0);
        self.y_sum.fill(0.0);
    }

    fn add(&mut self, bin: usize, y: f64) {
        if !y.is_finite() {
            return;
        }
        let g = -(-y).exp_m1();
        self.count += 1;
        self.g[1] += g;
        self.g[2] += g * g;
        self.g[3] += g * g * g;
        self.y_obs[bin] += 1;
        self.y_sum[bin] += y;
    }

    fn remove(&mut self, bin: usize, y: f64) {
        if !y.is_finite() {
            return;
        }
        let g = -(-y).exp_m1();
        self.count -= 1;
        self.g[1] -= g;
        self.g[2] -= g * g;
        self.g[3] -= g * g * g;
        self.y_obs[bin] -= 1;
        self.y_sum[bin] -= y;
    }
}

/// Resting orders of one side, densely stored for fast rescans.
#[derive(Debug, Clone, Default)]
struct SideOrders {
    /// (id, log price, distance to the opposite best at placement)
    entries: Vec<(OrderId, f64, f64)>,
    pos: HashMap<OrderId, usize>,
}

impl SideOrders {
    fn insert(&mut self, id: OrderId, log_price: f64, delta0: f64) {
        self.pos.insert(id, self.entries.len());
        self.entries.push((id, log_price, delta0));
    }

    fn remove(&mut self, id: OrderId) -> Option<(OrderId, f64, f64)> {
        let i = self.pos.remove(&id)?;
        let e = self.entries.swap_remove(i);
        if let Some(moved) = self.entries.get(i) {
            self.pos.insert(moved.0, i);
        }
        Some(e)
    }
}

/// Per-side sums kept current while a log is replayed. A side's sums are
/// valid for the opposite best in `reference`; when that best moves the side
/// is marked stale and rescanned at the next snapshot.
struct Tracker {
    y_bins: usize,
    y_max: f64,
    orders: [SideOrders; 2],
    sums: [SideSums; 2],
    fresh: [bool; 2],
    reference: [f64; 2],
}

impl Tracker {
    fn new(bins: &CancelBins) -> Self {
        Self {
            y_bins: bins.y_bins,
            y_max: bins.y_max,
            orders: Default::default(),
            sums: [SideSums::new(bins.y_bins + 1), SideSums::new(bins.y_bins + 1)],
            fresh: [false; 2],
            reference: [f64::NAN; 2],
        }
    }

    fn y_bin(&self, y: f64) -> usize {
        ((y / self.y_max * self.y_bins as f64) as usize).min(self.y_bins)
    }

    fn insert(&mut self, s: usize, id: OrderId, log_price: f64, delta0: f64) {
        self.orders[s].insert(id, log_price, delta0);
        if self.fresh[s] {
            let y = relative_distance(s, self.reference[s], log_price, delta0);
            let b = self.y_bin(y);
            self.sums[s].add(b, y);
        }
    }

    fn remove(&mut self, s: usize, id: OrderId) {
        if let Some((_, lp, d0)) = self.orders[s].remove(id) {
            if self.fresh[s] {
                let y = relative_distance(s, self.reference[s], lp, d0);
                let b = self.y_bin(y);
                self.sums[s].remove(b, y);
            }
        }
    }

    /// Bring both sides up to date with `quotes`.
    fn refresh(&mut self, quotes: &Quotes) {
        let opposite = [quotes.ask, quotes.bid];
        for s in 0..2 {
            if self.fresh[s] && self.reference[s] == opposite[s] {
                continue;
            }
            self.reference[s] = opposite[s];
            let mut sums = std::mem::replace(&mut self.sums[s], SideSums::new(0));
            sums.clear();
            for &(_, lp, d0) in &self.orders[s].entries {
                let y = relative_distance(s, opposite[s], lp, d0);
                sums.add(self.y_bin(y), y);
            }
            self.sums[s] = sums;
            self.fresh[s] = true;
        }
    }
}

/// One interval between cancellation opportunities: the book state the
/// cancellations are conditioned on and what was cancelled.
struct Interval {
    /// Own-side fraction, indexed by side (buy, sell).
    imb: [f64; 2],
    n_tot: usize,
    depth: [usize; 2],
    /// Opposite best of each side when the interval opened.
    reference: [f64; 2],
    sums: [SideSums; 2],
    /// (book id, side, y), sorted by id once the interval closes.
    cancelled: Vec<(OrderId, usize, f64)>,
    /// Steps with no events that follow this one.
    idle: u64,
}

impl Interval {
    fn open(book: &OrderBook, tracker: &mut Tracker) -> Option<Self> {
        let quotes = book.quotes().ok()?;
        tracker.refresh(&quotes);
        let n_tot = book.n_tot();
        Some(Self {
            imb: [book.n_buy() as f64 / n_tot as f64, book.n_sell() as f64 / n_tot as f64],
            n_tot,
            depth: [tracker.orders[0].entries.len(), tracker.orders[1].entries.len()],
            reference: tracker.reference,
            sums: tracker.sums.clone(),
            cancelled: Vec::new(),
            idle: 0,
        })
    }

    /// Record the cancellation of a resting order.
    fn cancel(&mut self, s: usize, id: OrderId, log_price: f64, delta0: f64) {
        self.cancelled.push((id, s, relative_distance(s, self.reference[s], log_price, delta0)));
    }
}

struct Accumulator {
    bins: CancelBins,
    y: Hist,
    imb: Hist,
    ntot: Hist,
    joint: JointStats,
}

impl Accumulator {
    fn y_bin(&self, y: f64) -> usize {
        ((y / self.bins.y_max * self.bins.y_bins as f64) as usize).min(self.bins.y_bins)
    }

    fn imb_bin(&self, v: f64) -> usize {
        ((v * self.bins.imb_bins as f64) as usize).min(self.bins.imb_bins - 1)
    }

    fn ntot_bin(&self, n: usize) -> usize {
        ((n as f64).log10() * self.bins.ntot_per_decade as f64 + 1e-9).floor() as usize
    }

    fn ensure_ntot(&mut self, bin: usize) {
        if bin >= self.ntot.obs.len() {
            self.ntot.obs.resize(bin + 1, 0);
            self.ntot.cancels.resize(bin + 1, 0);
            self.ntot.sum.resize(bin + 1, 0.0);
        }
    }

    /// `weight` observations of every order summarised in `sums`, on a side
    /// with own-side fraction `m` in a book of `n_tot` orders.
    fn add_side(&mut self, sums: &SideSums, m: f64, n_tot: usize, weight: u64) {
        if sums.count == 0 {
            return;
        }
        let w = weight as f64;
        for (b, (&n, &y)) in sums.y_obs.iter().zip(&sums.y_sum).enumerate() {
            self.y.obs[b] += n * weight;
            self.y.sum[b] += y * w;
        }
        let h = 1.0 / n_tot as f64;
        let mut hk = w;
        for k in 1..4 {
            hk *= h;
            let mut mj = 1.0;
            for j in 0..=k {
                self.joint.moments[k][j] += sums.g[k] * hk * mj;
                mj *= m;
            }
        }
        let count = sums.count as u64 * weight;
        let ib = self.imb_bin(m);
        self.imb.observe(ib, m, count);
        let kb = self.ntot_bin(n_tot);
        self.ensure_ntot(kb);
        self.ntot.observe(kb, n_tot as f64, count);
    }

    fn add_cancel(&mut self, y: f64, m: f64, n_tot: usize) {
        let yb = self.y_bin(y);
        self.y.cancels[yb] += 1;
        let ib = self.imb_bin(m);
        self.imb.cancels[ib] += 1;
        let kb = self.ntot_bin(n_tot);
        self.ensure_ntot(kb);
        self.ntot.cancels[kb] += 1;
        self.joint.cancelled.push((-(-y).exp_m1() / n_tot as f64, m));
    }

    /// Add an interval's observations. A side at the depth floor could not
    /// cancel at all, and once a side's cancellations reach the floor,
    /// later orders on it (in id order, the order cancellations are
    /// applied) were never at risk; both are left out. Idle steps after the
    /// interval observe the book as `tracker` holds it now.
    fn commit(&mut self, iv: &mut Interval, tracker: &mut Tracker, quotes: Option<Quotes>) {
        iv.cancelled.sort_by_key(|c| c.0);
        let floor = self.bins.depth_floor;
        for s in 0..2 {
            let depth = iv.depth[s];
            if depth <= floor {
                continue;
            }
            let mine = || iv.cancelled.iter().filter(|c| c.1 == s);
            let mut sums = std::mem::replace(&mut iv.sums[s], SideSums::new(0));
            if floor > 0 && mine().count() >= depth - floor {
                let cutoff = mine().map(|c| c.0).max().expect("at least one cancellation");
                // still resting: placements only open intervals
                for &(id, lp, d0) in &tracker.orders[s].entries {
                    if id > cutoff {
                        let y = relative_distance(s, iv.reference[s], lp, d0);
                        sums.remove(self.y_bin(y), y);
                    }
                }
            }
            self.add_side(&sums, iv.imb[s], iv.n_tot, 1);
            for &(_, _, y) in iv.cancelled.iter().filter(|c| c.1 == s && c.2.is_finite()) {
                self.add_cancel(y, iv.imb[s], iv.n_tot);
            }
        }
        if iv.idle > 0 {
            let Some(quotes) = quotes else { return };
            tracker.refresh(&quotes);
            let depth = [tracker.orders[0].entries.len(), tracker.orders[1].entries.len()];
            let n_tot = depth[0] + depth[1];
            for s in 0..2 {
                if depth[s] > floor {
                    let m = depth[s] as f64 / n_tot as f64;
                    self.add_side(&tracker.sums[s].clone(), m, n_tot, iv.idle);
                }
            }
        }
    }
}

/// Conditional cancellation curves, the factor construction of `A`, and a
/// joint fit, from a replay.
///
/// Cancellations are grouped into intervals. In an event-time log an
/// interval is one step: the state after the step's placement (if any),
/// with steps missing from the log counted as intervals without
/// cancellations. In a wall-clock log each placement opens an interval.
/// Each order resting at the start of an interval is one observation of
/// `(y, n_imb, n_tot)`. `P(C | v)` in a bin is cancels over observations,
/// the Bayes ratio `P(v | C) P(C) / P(v)` computed on counts.
pub fn fit_cancellation(log: &EventLog, tick: f64, bins: &CancelBins) -> Result<CancellationFit, CalibError> {
    if bins.y_bins == 0 || bins.imb_bins == 0 || bins.ntot_per_decade == 0 || !(bins.y_max > 0.0) {
        return Err(CalibError::Config(format!("bad cancellation bins {bins:?}")));
    }
    let stepped = log.clock == Clock::EventTime;
    let mut replay = Replay::new(tick)?;
    let mut acc = Accumulator {
        bins: *bins,
        y: Hist::new(bins.y_bins + 1),
        imb: Hist::new(bins.imb_bins),
        ntot: Hist::new(0),
        joint: JointStats::default(),
    };
    let mut tracker = Tracker::new(bins);
    let mut current: Option<Interval> = None;
    // event-time step the current interval belongs to
    let mut step: Option<i64> = None;
    let mut unattributed = 0u64;
    for (i, e) in log.events.iter().enumerate() {
        if stepped {
            let t = e.time as i64;
            if step.is_some_and(|s| t > s) {
                if let Some(mut iv) = current.take() {
                    // steps with no events at all left the book untouched
                    iv.idle = (t - step.unwrap() - 1) as u64;
                    acc.commit(&mut iv, &mut tracker, replay.book.quotes().ok());
                }
            }
            step = Some(t);
        } else if e.kind != EventKind::Cancel {
            if let Some(mut iv) = current.take() {
                acc.commit(&mut iv, &mut tracker, None);
            }
        }
        let resting = replay.ids.get(&e.order_id).and_then(|id| replay.book.get(*id)).cloned();
        match e.kind {
            EventKind::Cancel => {
                if stepped && current.is_none() {
                    // a step whose placement left no event
                    current = Interval::open(&replay.book, &mut tracker);
                }
                // anything still resting was resting when the interval opened
                match (&mut current, &resting) {
                    (Some(iv), Some(o)) => iv.cancel(side_index(o.side), o.id, o.log_price, o.delta0),
                    _ => unattributed += 1,
                }
                replay.apply(e, i)?;
                if let Some(o) = resting {
                    tracker.remove(side_index(o.side), o.id);
                }
            }
            EventKind::Limit | EventKind::Market => {
                replay.apply(e, i)?;
                if e.kind == EventKind::Limit {
                    let id = replay.ids[&e.order_id];
                    let o = replay.book.get(id).expect("limit orders rest");
                    tracker.insert(side_index(o.side), id, o.log_price, o.delta0);
                } else if let Some(o) = resting {
                    tracker.remove(side_index(o.side), o.id);
                }
                current = Interval::open(&replay.book, &mut tracker);
            }
        }
    }
    if let Some(mut iv) = current.take() {
        acc.commit(&mut iv, &mut tracker, None);
    }
    let observations: u64 = acc.y.obs.iter().sum();
    let cancels: u64 = acc.y.cancels.iter().sum();
    if cancels < 1000 {
        return Err(CalibError::Insufficient(format!("need 1000 attributed cancellations, have {cancels}")));
    }
    let p_c = cancels as f64 / observations as f64;
    let y_width = bins.y_max / bins.y_bins as f64;
    let curve_y = acc.y.points(|k| {
        if k < bins.y_bins {
            (k as f64 * y_width, (k + 1) as f64 * y_width)
        } else {
            (bins.y_max, f64::INFINITY)
        }
    });
    let imb_width = 1.0 / bins.imb_bins as f64;
    let curve_imb = acc.imb.points(|k| (k as f64 * imb_width, (k + 1) as f64 * imb_width));
    let per = bins.ntot_per_decade as f64;
    let curve_ntot = acc.ntot.points(|k| (10f64.powf(k as f64 / per), 10f64.powf((k + 1) as f64 / per)));
    let min = bins.min_observations;
    let usable = |c: &[CurvePoint]| c.iter().filter(|p| p.observations >= min).cloned().collect::<Vec<_>>();

    let (mut fg, mut gg) = (0.0, 0.0);
    for p in usable(&curve_y) {
        let g = -(-p.mean).exp_m1();
        fg += p.p * g;
        gg += g * g;
    }
    if gg == 0.0 {
        return Err(CalibError::Fit("no populated y bins".into()));
    }
    let k1 = fg / gg;

    let imb_pts = usable(&curve_imb);
    let xs: Vec<f64> = imb_pts.iter().map(|p| p.mean).collect();
    let ys: Vec<f64> = imb_pts.iter().map(|p| p.p).collect();
    let line = linear_fit(&xs, &ys).ok_or_else(|| CalibError::Fit("imbalance curve needs two populated bins".into()))?;
    if line.slope <= 0.0 {
        return Err(CalibError::Fit(format!("imbalance slope {} is not positive", line.slope)));
    }
    let (k2, b) = (line.slope, line.intercept / line.slope);

    let ntot_pts: Vec<CurvePoint> = usable(&curve_ntot).into_iter().filter(|p| p.cancels > 0).collect();
    if ntot_pts.len() < 2 {
        return Err(CalibError::Fit("book-size curve needs two populated bins".into()));
    }
    let lx: Vec<f64> = ntot_pts.iter().map(|p| p.mean.ln()).collect();
    let ly: Vec<f64> = ntot_pts.iter().map(|p| p.p.ln()).collect();
    let k3 = (lx.iter().zip(&ly).map(|(x, y)| x + y).sum::<f64>() / lx.len() as f64).exp();
    let free = linear_fit(&lx, &ly).expect("two distinct book sizes");

    Ok(CancellationFit {
        k1,
        k2,
        k3,
        b,
        p_c,
        a: assemble_scale(k1, k2, k3, p_c),
        ntot_slope: free.slope,
        ntot_slope_se: free.slope_se,
        cancels,
        observations,
        unattributed,
        joint: fit_joint(&acc.joint)?,
        curve_y,
        curve_imb,
        curve_ntot,
    })
}
