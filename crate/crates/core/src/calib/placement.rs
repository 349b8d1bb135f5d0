use std::collections::HashMap;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::load::{EventLog, Replay};
use super::CalibError;
use crate::book::Side;
use crate::events::{Clock, EventKind};
use crate::flow::effective_transaction_prob;

/// One order placement with the book context it arrived into.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementRecord {
    pub time: f64,
    pub side: Side,
    /// Arrived as an effective market order.
    pub market: bool,
    /// Log price relative to the same best, positive toward the opposite
    /// best. Absent for market orders, whose `x` is censored.
    pub x: Option<f64>,
    /// Log spread before the placement.
    pub spread: f64,
    /// Midprice in currency before the placement.
    pub midprice: f64,
    pub spread_ticks: i64,
    pub size: f64,
    /// Seconds since the spread last widened; absent if it never has.
    pub since_spread_increase: Option<f64>,
    /// `s - T/p`: the placement is a market order iff `x` reaches this.
    pub threshold: f64,
}

/// Replay the log and annotate each placement that met a two-sided book.
pub fn extract_placements(log: &EventLog, tick: f64) -> Result<Vec<PlacementRecord>, CalibError> {
    let mut replay = Replay::new(tick)?;
    let mut out = Vec::new();
    let mut last_widening: Option<f64> = None;
    let mut spread_before: Option<i64> = None;
    for (i, e) in log.events.iter().enumerate() {
        let ticks = match (replay.book.best_bid_ticks(), replay.book.best_ask_ticks()) {
            (Some(b), Some(a)) => Some((b, a)),
            _ => None,
        };
        if let (Some((bid, ask)), EventKind::Limit | EventKind::Market) = (ticks, e.kind) {
            let quotes = replay.book.quotes().expect("two-sided book");
            let midprice = quotes.mid.exp();
            let market = e.kind == EventKind::Market;
            let x = (!market).then(|| {
                let lp = e.price.ln();
                match e.side {
                    Side::Buy => lp - quotes.bid,
                    Side::Sell => quotes.ask - lp,
                }
            });
            out.push(PlacementRecord {
                time: e.time,
                side: e.side,
                market,
                x,
                spread: quotes.spread,
                midprice,
                spread_ticks: ask - bid,
                size: e.size,
                since_spread_increase: last_widening.map(|t| e.time - t),
                threshold: quotes.spread - tick / midprice,
            });
        }
        replay.apply(e, i)?;
        let now = match (replay.book.best_bid_ticks(), replay.book.best_ask_ticks()) {
            (Some(b), Some(a)) => Some(a - b),
            _ => None,
        };
        if let (Some(before), Some(after)) = (spread_before, now) {
            if after > before {
                last_widening = Some(e.time);
            }
        }
        spread_before = now;
    }
    Ok(out)
}

/// Data-quality filters applied to placements before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterRules {
    /// Largest accepted order size in shares.
    pub max_size: f64,
    /// Largest accepted spread in ticks.
    pub max_spread_ticks: i64,
    /// Keep only placements that are alone in their second.
    pub same_second: bool,
    /// Reject placements this many seconds or less after a spread widening.
    pub stale_window: f64,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self { max_size: 1e6, max_spread_ticks: 100, same_second: true, stale_window: 5.0 }
    }
}

impl FilterRules {
    pub fn validate(&self) -> Result<(), CalibError> {
        if !(self.max_size > 0.0 && self.max_spread_ticks > 0 && self.stale_window > 0.0) {
            return Err(CalibError::Config(format!("filter thresholds must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Placements rejected per rule; each placement counts under the first
/// rule it fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Rejections {
    pub size: usize,
    pub spread: usize,
    pub same_second: usize,
    pub stale: usize,
}

impl Rejections {
    pub fn total(&self) -> usize {
        self.size + self.spread + self.same_second + self.stale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Filtered {
    pub kept: Vec<PlacementRecord>,
    pub rejected: Rejections,
}

/// Apply the filters. The timing rules need real seconds and are skipped
/// for event-time logs.
pub fn filter_placements(placements: &[PlacementRecord], rules: &FilterRules, clock: Clock) -> Filtered {
    let wall = clock == Clock::WallClock;
    let mut per_second: HashMap<i64, usize> = HashMap::new();
    if wall && rules.same_second {
        for p in placements {
            *per_second.entry(p.time.floor() as i64).or_default() += 1;
        }
    }
    let mut rejected = Rejections::default();
    let mut kept = Vec::with_capacity(placements.len());
    for p in placements {
        if p.size > rules.max_size {
            rejected.size += 1;
        } else if p.spread_ticks <= 0 || p.spread_ticks > rules.max_spread_ticks {
            rejected.spread += 1;
        } else if wall && rules.same_second && per_second[&(p.time.floor() as i64)] > 1 {
            rejected.same_second += 1;
        } else if wall && p.since_spread_increase.is_some_and(|dt| dt < rules.stale_window) {
            rejected.stale += 1;
        } else {
            kept.push(p.clone());
        }
    }
    Filtered { kept, rejected }
}

/// Symmetric logarithmic bins: `per_decade` bins per decade of `|x|` on
/// `[min_abs, max_abs]` on each side, plus one central bin `(-min_abs, min_abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinSpec {
    pub min_abs: f64,
    pub max_abs: f64,
    pub per_decade: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self { min_abs: 1e-4, max_abs: 1.0, per_decade: 8 }
    }
}

impl BinSpec {
    /// Ascending bin edges.
    pub fn edges(&self) -> Vec<f64> {
        let decades = (self.max_abs / self.min_abs).log10();
        let n = (decades * self.per_decade as f64).ceil().max(1.0) as usize;
        let pos: Vec<f64> = (0..=n).map(|i| self.min_abs * 10f64.powf(i as f64 / self.per_decade as f64)).collect();
        pos.iter().rev().map(|v| -v).chain(pos.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub weight: f64,
    pub density: f64,
}

/// Censoring-corrected placement distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PStar {
    pub s0: f64,
    /// Placements (limit and market) with spread above `s0`.
    pub n: usize,
    /// Limit-order `(x, w)` pairs.
    pub samples: Vec<(f64, f64)>,
    /// Nonempty bins only.
    pub bins: Vec<WeightedBin>,
    /// Limit orders at or beyond every observed threshold, which no weight
    /// can correct; dropped.
    pub dropped: usize,
    /// Samples outside the bin range (kept in `samples`).
    pub out_of_range: usize,
}

/// Weight each limit order by `N / #{i : s_i - T/p_i > x_j}` over the
/// placements with `s > s0`, then histogram on `bins`.
pub fn reconstruct_pstar(placements: &[PlacementRecord], s0: f64, bins: &BinSpec) -> Result<PStar, CalibError> {
    let sub: Vec<&PlacementRecord> = placements.iter().filter(|p| p.spread > s0).collect();
    let n = sub.len();
    let mut thresholds: Vec<f64> = sub.iter().map(|p| p.threshold).collect();
    thresholds.sort_by(f64::total_cmp);
    let mut samples = Vec::new();
    let mut dropped = 0;
    for p in &sub {
        let Some(x) = p.x else { continue };
        let above = n - thresholds.partition_point(|&c| c <= x);
        if above == 0 {
            dropped += 1;
        } else {
            samples.push((x, n as f64 / above as f64));
        }
    }
    if samples.is_empty() {
        return Err(CalibError::Insufficient(format!("no limit orders with spread above {s0}")));
    }
    let all_edges = bins.edges();
    let nb = all_edges.len() - 1;
    let mut count = vec![0usize; nb];
    let mut weight = vec![0.0; nb];
    let mut out_of_range = 0;
    for &(x, w) in &samples {
        if x < all_edges[0] || x >= all_edges[nb] {
            out_of_range += 1;
            continue;
        }
        let k = all_edges.partition_point(|&e| e <= x) - 1;
        count[k] += 1;
        weight[k] += w;
    }
    let bins = (0..nb)
        .filter(|&k| count[k] > 0)
        .map(|k| {
            let (lo, hi) = (all_edges[k], all_edges[k + 1]);
            WeightedBin { lo, hi, count: count[k], weight: weight[k], density: weight[k] / (n as f64 * (hi - lo)) }
        })
        .collect();
    Ok(PStar { s0, n, samples, bins, dropped, out_of_range })
}

/// How a [`PlacementFit`] treated the censored market orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    /// Limit orders only, each carrying its reconstruction weight.
    Weighted,
    /// Limit orders by density, market orders by the tail mass beyond
    /// their threshold.
    Censored,
}

/// Centered Student fit to placement offsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementFit {
    pub alpha_x: f64,
    pub sigma_x: f64,
    pub log_likelihood: f64,
    /// Kish effective sample size of the weights; the sample count for a
    /// censored fit.
    pub effective_n: f64,
    /// Degrees of freedom ran into the upper search bound: the data look
    /// Gaussian and a Student tail does not describe them.
    pub near_gaussian: bool,
    pub method: FitMethod,
}

const NU_MIN: f64 = 0.3;
const NU_MAX: f64 = 100.0;

fn fit_error(e: argmin::core::Error) -> CalibError {
    CalibError::Fit(e.to_string())
}

fn log_norm(nu: f64, sigma: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln() - sigma.ln()
}

fn student_ll(xs: &[(f64, f64)], nu: f64, sigma: f64) -> f64 {
    let c = log_norm(nu, sigma);
    xs.iter().map(|&(x, w)| w * (c - 0.5 * (nu + 1.0) * (x * x / (nu * sigma * sigma)).ln_1p())).sum()
}

/// Scale maximising the likelihood at fixed `nu`, by EM.
fn sigma_given_nu(xs: &[(f64, f64)], nu: f64, start: f64, wsum: f64) -> Result<f64, CalibError> {
    let mut s2 = start * start;
    for _ in 0..2000 {
        let num: f64 = xs.iter().map(|&(x, w)| w * (nu + 1.0) / (nu + x * x / s2) * x * x).sum();
        let next = num / wsum;
        if !(next > 0.0 && next.is_finite()) {
            return Err(CalibError::Fit(format!("scale iteration left (0, inf) at nu = {nu}")));
        }
        if (next / s2 - 1.0).abs() < 1e-10 {
            return Ok(next.sqrt());
        }
        s2 = next;
    }
    Err(CalibError::Fit(format!("scale iteration did not converge at nu = {nu} (last sigma {})", s2.sqrt())))
}

/// Negative profile likelihood over `ln nu`.
#[derive(Clone, Copy)]
struct Profile<'a> {
    xs: &'a [(f64, f64)],
    wsum: f64,
    start: f64,
}

impl Profile<'_> {
    fn at(&self, ln_nu: f64) -> Result<(f64, f64), CalibError> {
        let nu = ln_nu.exp();
        let s = sigma_given_nu(self.xs, nu, self.start, self.wsum)?;
        Ok((student_ll(self.xs, nu, s), s))
    }
}

impl CostFunction for Profile<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, ln_nu: &f64) -> Result<f64, argmin::core::Error> {
        Ok(-self.at(*ln_nu)?.0)
    }
}

fn median_abs(xs: impl Iterator<Item = f64>) -> Result<f64, CalibError> {
    let mut abs: Vec<f64> = xs.map(f64::abs).collect();
    abs.sort_by(f64::total_cmp);
    let m = abs[abs.len() / 2];
    if m > 0.0 {
        Ok(m)
    } else {
        Err(CalibError::Fit("more than half of the samples are zero".into()))
    }
}

/// Weighted maximum-likelihood fit of `sigma * t_nu`: the scale by EM at
/// each `nu`, `ln nu` by golden section on the profile. Pass weight 1 for
/// plain samples.
pub fn fit_student(samples: &[(f64, f64)]) -> Result<PlacementFit, CalibError> {
    let xs: Vec<(f64, f64)> = samples.iter().copied().filter(|&(x, w)| x.is_finite() && w > 0.0).collect();
    let wsum: f64 = xs.iter().map(|p| p.1).sum();
    let w2: f64 = xs.iter().map(|p| p.1 * p.1).sum();
    let effective_n = if xs.is_empty() { 0.0 } else { wsum * wsum / w2 };
    if effective_n < 1000.0 {
        return Err(CalibError::Insufficient(format!("need 1000 effective samples, have {effective_n:.0}")));
    }
    let profile = Profile { xs: &xs, wsum, start: median_abs(xs.iter().map(|p| p.0))? };
    let solver = GoldenSectionSearch::new(NU_MIN.ln(), NU_MAX.ln()).and_then(|g| g.with_tolerance(1e-7)).map_err(fit_error)?;
    let res = Executor::new(profile, solver)
        .configure(|s| s.param(1.0f64.ln()).max_iters(500))
        .run()
        .map_err(fit_error)?;
    let ln_nu = *res.state().get_best_param().expect("golden section keeps a best point");
    let (ll, sigma) = profile.at(ln_nu)?;
    let alpha = ln_nu.exp();
    Ok(PlacementFit {
        alpha_x: alpha,
        sigma_x: sigma,
        log_likelihood: ll,
        effective_n,
        near_gaussian: alpha > 0.95 * NU_MAX,
        method: FitMethod::Weighted,
    })
}

/// Sum of `f` over `xs` in fixed chunks, so the result does not depend on
/// thread scheduling.
fn chunked_sum(xs: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = xs.par_chunks(1 << 15).map(|c| c.iter().map(|&x| f(x)).sum()).collect();
    parts.iter().sum()
}

/// Negative right-censored log-likelihood over `(ln nu, ln sigma)`.
struct Censored<'a> {
    limits: &'a [f64],
    thresholds: &'a [f64],
}

impl Censored<'_> {
    fn ll(&self, nu: f64, sigma: f64) -> f64 {
        let c = log_norm(nu, sigma);
        let t = StudentsT::new(0.0, 1.0, nu).expect("nu > 0");
        let dens = chunked_sum(self.limits, |x| c - 0.5 * (nu + 1.0) * (x * x / (nu * sigma * sigma)).ln_1p());
        let tail = chunked_sum(self.thresholds, |th| t.sf(th / sigma).ln());
        dens + tail
    }
}

impl CostFunction for Censored<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        let nu = p[0].exp();
        if !(NU_MIN..=NU_MAX).contains(&nu) {
            return Ok(f64::INFINITY);
        }
        let ll = self.ll(nu, p[1].exp());
        Ok(if ll.is_nan() { f64::INFINITY } else { -ll })
    }
}

/// Maximum-likelihood fit of `sigma * t_nu` to placements in which every
/// market order is right-censored at its threshold `s - T/p`: limit
/// orders contribute their density, market orders `P(x >= s - T/p)`.
/// Nelder-Mead on `(ln nu, ln sigma)`.
pub fn fit_student_censored(placements: &[PlacementRecord]) -> Result<PlacementFit, CalibError> {
    let limits: Vec<f64> = placements.iter().filter_map(|p| p.x).filter(|x| x.is_finite()).collect();
    let thresholds: Vec<f64> = placements.iter().filter(|p| p.x.is_none()).map(|p| p.threshold).collect();
    if limits.len() < 1000 {
        return Err(CalibError::Insufficient(format!("need 1000 limit orders, have {}", limits.len())));
    }
    let sigma0 = median_abs(limits.iter().copied())?.ln();
    let nu0 = 1.5f64.ln();
    let simplex = vec![vec![nu0, sigma0], vec![nu0 + 0.3, sigma0], vec![nu0, sigma0 + 0.3]];
    let n = (limits.len() + thresholds.len()) as f64;
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-9 * n).map_err(fit_error)?;
    let cost = Censored { limits: &limits, thresholds: &thresholds };
    let res = Executor::new(cost, solver).configure(|s| s.max_iters(1000)).run().map_err(fit_error)?;
    let state = res.state();
    let p = state.get_best_param().expect("simplex keeps a best point");
    if !state.get_best_cost().is_finite() {
        return Err(CalibError::Fit(format!("censored likelihood not finite at {p:?}")));
    }
    let (alpha, sigma) = (p[0].exp(), p[1].exp());
    Ok(PlacementFit {
        alpha_x: alpha,
        sigma_x: sigma,
        log_likelihood: -state.get_best_cost(),
        effective_n: n,
        near_gaussian: alpha > 0.95 * NU_MAX,
        method: FitMethod::Censored,
    })
}

/// Empirical and predicted immediate-transaction probability in one
/// spread bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransactionBin {
    pub min_ticks: i64,
    pub max_ticks: i64,
    pub placements: usize,
    pub markets: usize,
    pub empirical: f64,
    /// Binomial standard error of `empirical`.
    pub std_err: f64,
    /// Model probability averaged over the bin's placements.
    pub predicted: f64,
}

/// Spread bins: single ticks 1..=20, then ranges doubling in width.
fn spread_bin(ticks: i64) -> (i64, i64) {
    if ticks <= 20 {
        return (ticks, ticks);
    }
    let mut lo = 21;
    let mut width = 20;
    while ticks >= lo + width {
        lo += width;
        width *= 2;
    }
    (lo, lo + width - 1)
}

/// Fraction of placements that transacted immediately, by spread, next to
/// the fitted model's prediction at the same spreads and midprices.
pub fn empirical_transaction_curve(placements: &[PlacementRecord], fit: &PlacementFit, tick: f64) -> Vec<TransactionBin> {
    let mut acc: std::collections::BTreeMap<(i64, i64), (usize, usize, f64)> = Default::default();
    for p in placements {
        let e = acc.entry(spread_bin(p.spread_ticks)).or_default();
        e.0 += 1;
        e.1 += p.market as usize;
        e.2 += effective_transaction_prob(p.spread, p.midprice, tick, fit.sigma_x, fit.alpha_x);
    }
    acc.into_iter()
        .map(|((lo, hi), (n, m, pred))| {
            let emp = m as f64 / n as f64;
            TransactionBin {
                min_ticks: lo,
                max_ticks: hi,
                placements: n,
                markets: m,
                empirical: emp,
                std_err: (emp * (1.0 - emp) / n as f64).sqrt(),
                predicted: pred / n as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::STEP_HEADER;
    use crate::calib::load_events;
    use crate::flow::StudentSampler;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;
    use statrs::distribution::Continuous;

    fn rec(time: f64, size: f64, spread_ticks: i64, since: Option<f64>) -> PlacementRecord {
        PlacementRecord {
            time,
            side: Side::Buy,
            market: false,
            x: Some(-0.001),
            spread: 0.001 * spread_ticks as f64,
            midprice: 1000.0,
            spread_ticks,
            size,
            since_spread_increase: since,
            threshold: 0.001 * (spread_ticks - 1) as f64,
        }
    }

    #[test]
    fn filter_rules() {
        let r = FilterRules::default();
        let ps = vec![
            rec(0.2, 2e6, 1, None),
            rec(1.1, 1.0, 1, None),
            rec(1.7, 1.0, 1, None),
            rec(2.5, 1.0, 1, Some(3.0)),
            rec(3.5, 1.0, 150, None),
            rec(4.0, 1.0, 2, Some(6.0)),
        ];
        let f = filter_placements(&ps, &r, Clock::WallClock);
        assert_eq!(f.rejected, Rejections { size: 1, spread: 1, same_second: 2, stale: 1 });
        assert_eq!(f.kept.len(), 1);
        assert_eq!(f.kept[0].time, 4.0);
        // event time: the clock rules do not apply
        let f = filter_placements(&ps, &r, Clock::EventTime);
        assert_eq!(f.rejected, Rejections { size: 1, spread: 1, same_second: 0, stale: 0 });
    }

    #[test]
    fn filter_idempotent() {
        let r = FilterRules::default();
        let ps: Vec<_> = (0..200).map(|i| rec(i as f64 * 0.7, (i % 7) as f64 * 4e5, 1 + i % 130, Some((i % 9) as f64))).collect();
        let once = filter_placements(&ps, &r, Clock::WallClock).kept;
        let twice = filter_placements(&once, &r, Clock::WallClock);
        assert_eq!(twice.kept, once);
        assert_eq!(twice.rejected.total(), 0);
    }

    #[test]
    fn extraction_from_log() {
        let body = "0,L,0,B,99,1\n0,L,1,S,101,1\n1,L,2,B,100,5\n2,M,1,B,101,1\n3,C,2,B,100,1\n";
        let log = load_events(format!("{STEP_HEADER}\n{body}").as_bytes()).unwrap();
        let ps = extract_placements(&log, 1.0).unwrap();
        assert_eq!(ps.len(), 2);
        let p = &ps[0];
        assert_eq!(p.spread_ticks, 2);
        assert!((p.x.unwrap() - (100f64 / 99.0).ln()).abs() < 1e-15);
        assert!((p.midprice - (99.0f64 * 101.0).sqrt()).abs() < 1e-9);
        assert_eq!(p.size, 5.0);
        assert!(ps[1].market && ps[1].x.is_none());
        assert_eq!(ps[1].spread_ticks, 1);
    }

    #[test]
    fn spread_widening_clock() {
        let body = "0,L,0,B,99,1\n0,L,1,S,100,1\n0,L,2,S,101,1\n10,C,1,S,100,1\n12,L,3,B,98,1\n";
        let log = load_events(format!("{TIMESTAMP_HEADER}\n{body}").as_bytes()).unwrap();
        let ps = extract_placements(&log, 1.0).unwrap();
        assert_eq!(ps.last().unwrap().since_spread_increase, Some(2.0));
        assert_eq!(ps[0].since_spread_increase, None);
    }
    use crate::events::TIMESTAMP_HEADER;

    /// Placements with a known Student P*(x) and random spreads; those
    /// with x beyond the threshold become censored market orders.
    fn synthetic(n: usize, seed: u64) -> Vec<PlacementRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = StudentSampler::new(2.4e-3, 1.3).unwrap();
        (0..n)
            .map(|_| {
                let ticks = rng.random_range(1..=8i64);
                let spread = 5e-4 * ticks as f64;
                let threshold = spread - 3e-4;
                let x: f64 = sampler.sample(&mut rng);
                let market = x >= threshold;
                PlacementRecord {
                    time: 0.0,
                    side: Side::Buy,
                    market,
                    x: (!market).then_some(x),
                    spread,
                    midprice: 1.0,
                    spread_ticks: ticks,
                    size: 1.0,
                    since_spread_increase: None,
                    threshold,
                }
            })
            .collect()
    }

    #[test]
    fn weights_brute_force() {
        let ps = synthetic(3000, 1);
        let r = reconstruct_pstar(&ps, 0.0, &BinSpec::default()).unwrap();
        let n = ps.len() as f64;
        let limits: Vec<f64> = ps.iter().filter_map(|p| p.x).collect();
        assert_eq!(r.samples.len(), limits.len());
        for (&(x, w), &xo) in r.samples.iter().zip(&limits) {
            assert_eq!(x, xo);
            let above = ps.iter().filter(|p| p.threshold > x).count() as f64;
            assert_eq!(w, n / above);
            assert!(w >= 1.0);
        }
    }

    #[test]
    fn uncensored_weights_are_one() {
        let mut ps = synthetic(2000, 2);
        for p in &mut ps {
            p.spread = 10.0;
            p.threshold = 10.0;
            p.market = false;
        }
        // put x back for the former market orders
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in &mut ps {
            if p.x.is_none() {
                p.x = Some(rng.random_range(0.0..0.01));
            }
        }
        let r = reconstruct_pstar(&ps, 0.0, &BinSpec::default()).unwrap();
        assert!(r.samples.iter().all(|&(_, w)| w == 1.0));
        for b in &r.bins {
            let plain = ps.iter().filter(|p| (b.lo..b.hi).contains(&p.x.unwrap())).count();
            assert_eq!(b.count, plain);
            assert_eq!(b.weight, plain as f64);
        }
    }

    #[test]
    fn reconstruction_matches_true_density() {
        let ps = synthetic(400_000, 3);
        let spec = BinSpec { min_abs: 1e-4, max_abs: 0.1, per_decade: 5 };
        let r = reconstruct_pstar(&ps, 0.0, &spec).unwrap();
        let t = StudentsT::new(0.0, 2.4e-3, 1.3).unwrap();
        // beyond the largest threshold nothing is observable
        let support = ps.iter().map(|p| p.threshold).fold(f64::MIN, f64::max);
        let mut checked = 0;
        for b in r.bins.iter().filter(|b| b.count >= 400 && b.hi <= support) {
            // exact bin-average density by numerical integration
            let k = 200;
            let h = (b.hi - b.lo) / k as f64;
            let avg = (0..k).map(|i| t.pdf(b.lo + (i as f64 + 0.5) * h)).sum::<f64>() / k as f64;
            assert!((b.density / avg - 1.0).abs() < 0.1, "bin [{}, {}): {} vs {}", b.lo, b.hi, b.density, avg);
            checked += 1;
        }
        assert!(checked >= 10);
    }

    #[test]
    fn spread_condition_leaves_upper_bins_unchanged() {
        let ps = synthetic(50_000, 4);
        let spec = BinSpec::default();
        let s0 = 0.003;
        let all = reconstruct_pstar(&ps, 0.0, &spec).unwrap();
        let cond = reconstruct_pstar(&ps, s0, &spec).unwrap();
        assert!(cond.n < all.n);
        let upper = |r: &PStar| r.bins.iter().filter(|b| b.lo >= s0).map(|b| (b.lo, b.count, b.density)).collect::<Vec<_>>();
        let (a, c) = (upper(&all), upper(&cond));
        assert!(!a.is_empty());
        assert_eq!(a.len(), c.len());
        for (u, v) in a.iter().zip(&c) {
            assert_eq!((u.0, u.1), (v.0, v.1));
            assert!((u.2 / v.2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn student_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = StudentSampler::new(2.4e-3, 1.31).unwrap();
        let xs: Vec<(f64, f64)> = (0..100_000).map(|_| (s.sample(&mut rng), 1.0)).collect();
        let f = fit_student(&xs).unwrap();
        assert!((f.alpha_x / 1.31 - 1.0).abs() < 0.05, "{f:?}");
        assert!((f.sigma_x / 2.4e-3 - 1.0).abs() < 0.05, "{f:?}");
        assert!(!f.near_gaussian);
    }

    #[test]
    fn gaussian_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = rand_distr::Normal::new(0.0, 1e-3).unwrap();
        let xs: Vec<(f64, f64)> = (0..20_000).map(|_| (n.sample(&mut rng), 1.0)).collect();
        let f = fit_student(&xs).unwrap();
        assert!(f.near_gaussian, "{f:?}");
        assert!((f.sigma_x / 1e-3 - 1.0).abs() < 0.05);
    }

    #[test]
    fn weighted_equals_repeated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = StudentSampler::new(1.0, 2.0).unwrap();
        let base: Vec<f64> = (0..3000).map(|_| s.sample(&mut rng)).collect();
        let weighted: Vec<(f64, f64)> = base.iter().enumerate().map(|(i, &x)| (x, 1.0 + (i % 2) as f64)).collect();
        let repeated: Vec<(f64, f64)> =
            base.iter().enumerate().flat_map(|(i, &x)| std::iter::repeat_n((x, 1.0), 1 + i % 2)).collect();
        let (a, b) = (fit_student(&weighted).unwrap(), fit_student(&repeated).unwrap());
        assert!((a.alpha_x / b.alpha_x - 1.0).abs() < 1e-6);
        assert!((a.sigma_x / b.sigma_x - 1.0).abs() < 1e-6);
        assert!(fit_student(&weighted[..500]).is_err());
    }

    #[test]
    fn spread_bins() {
        assert_eq!(spread_bin(1), (1, 1));
        assert_eq!(spread_bin(20), (20, 20));
        assert_eq!(spread_bin(21), (21, 40));
        assert_eq!(spread_bin(40), (21, 40));
        assert_eq!(spread_bin(41), (41, 80));
        assert_eq!(spread_bin(81), (81, 160));
    }

    #[test]
    fn transaction_curve_on_synthetic() {
        let ps = synthetic(200_000, 5);
        let fit = PlacementFit { alpha_x: 1.3, sigma_x: 2.4e-3, log_likelihood: 0.0, effective_n: 0.0, near_gaussian: false, method: FitMethod::Weighted };
        // tick / midprice = 3e-4 in the synthetic records
        let curve = empirical_transaction_curve(&ps, &fit, 3e-4);
        assert_eq!(curve.len(), 8);
        for b in &curve {
            assert!((b.empirical - b.predicted).abs() < 4.0 * b.std_err + 1e-3, "{b:?}");
        }
    }
}
