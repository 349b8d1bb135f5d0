//! Relative limit prices and the transaction-probability curve.

use rand::Rng;
use serde::{Deserialize, Serialize};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{check, FlowError};
use crate::book::{Quotes, Side, TickGrid};

/// Upper bound on simulated tick indices; prices beyond it are clamped.
pub const MAX_PRICE_TICKS: i64 = 1 << 48;

/// Draws `sigma * Z / sqrt(V / nu)` with `Z` standard normal and `V`
/// chi-square with `nu` degrees of freedom. Valid for non-integer `nu`.
#[derive(Debug, Clone)]
pub struct StudentSampler {
    scale: f64,
    dof: f64,
    chi: ChiSquared<f64>,
}

impl StudentSampler {
    pub fn new(scale: f64, dof: f64) -> Result<Self, FlowError> {
        check("sigma_x", scale, scale > 0.0, "> 0")?;
        check("alpha_x", dof, dof > 0.0, "> 0")?;
        let chi = ChiSquared::new(dof).map_err(|_| FlowError::Parameter {
            name: "alpha_x",
            value: dof,
            expected: "> 0",
        })?;
        Ok(Self { scale, dof, chi })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }
}

impl Distribution<f64> for StudentSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let v = self.chi.sample(rng);
        self.scale * z / (v / self.dof).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderClass {
    /// Effective limit order at relative log price `x` from the same best.
    Limit(f64),
    /// Effective market order.
    Market,
}

/// Market iff `x >= s - T/p`, with `p` the midprice in currency.
pub fn classify_order(x: f64, spread: f64, midprice: f64, grid: &TickGrid) -> OrderClass {
    if x >= spread - grid.tick_size() / midprice {
        OrderClass::Market
    } else {
        OrderClass::Limit(x)
    }
}

/// How a continuous limit price is moved onto the tick grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Away from the opposite best: buys round down, sells round up. The
    /// relative price `x` is truncated toward the passive side for both.
    #[default]
    Passive,
    /// Nearest grid price.
    Nearest,
    /// `floor(p / T)` for both sides. Shifts every sell order up to one tick
    /// toward the bid, which drags the midprice down over long runs.
    Floor,
}

impl Rounding {
    pub fn name(self) -> &'static str {
        match self {
            Rounding::Passive => "passive",
            Rounding::Nearest => "nearest",
            Rounding::Floor => "floor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "passive" => Some(Rounding::Passive),
            "nearest" => Some(Rounding::Nearest),
            "floor" => Some(Rounding::Floor),
            _ => None,
        }
    }
}

/// Grid price for an effective limit order at relative price `x`, or `None`
/// when rounding lands on or through the opposite best.
pub fn limit_price_ticks(
    side: Side,
    x: f64,
    quotes: &Quotes,
    best_bid: i64,
    best_ask: i64,
    grid: &TickGrid,
    rounding: Rounding,
) -> Option<i64> {
    let log_price = match side {
        Side::Buy => quotes.bid + x,
        Side::Sell => quotes.ask - x,
    };
    // The relative tolerance absorbs exp/ln round-off for prices that sit on
    // the grid, e.g. x = 0 must reproduce the same best exactly.
    let q = log_price.exp() / grid.tick_size();
    let ticks = if q.is_nan() {
        1.0
    } else {
        match (rounding, side) {
            (Rounding::Nearest, _) => q.round(),
            (Rounding::Passive, Side::Sell) => (q * (1.0 - 1e-12)).ceil(),
            _ => (q * (1.0 + 1e-12)).floor(),
        }
    };
    let ticks = ticks.clamp(1.0, MAX_PRICE_TICKS as f64) as i64;
    match side {
        Side::Buy if ticks >= best_ask => None,
        Side::Sell if ticks <= best_bid => None,
        _ => Some(ticks),
    }
}

/// Probability that a draw from the placement distribution exceeds the
/// spread: `1 - F(s / sigma; alpha)`.
pub fn transaction_prob(spread: f64, sigma_x: f64, alpha_x: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, alpha_x).expect("alpha_x > 0");
    t.sf(spread / sigma_x)
}

/// Market-order probability realised by [`classify_order`] at spread `s`
/// and midprice `p`: the upper tail evaluated at `s - T/p`.
pub fn effective_transaction_prob(spread: f64, midprice: f64, tick_size: f64, sigma_x: f64, alpha_x: f64) -> f64 {
    transaction_prob(spread - tick_size / midprice, sigma_x, alpha_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> TickGrid {
        TickGrid::new(1.0).unwrap()
    }

    fn quotes(bid: i64, ask: i64) -> Quotes {
        let (b, a) = ((bid as f64).ln(), (ask as f64).ln());
        Quotes { bid: b, ask: a, mid: 0.5 * (a + b), spread: a - b }
    }

    #[test]
    fn sampler_is_symmetric() {
        let s = StudentSampler::new(2.4e-3, 1.31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| s.sample(&mut rng)).collect();
        let pos = xs.iter().filter(|&&x| x > 0.0).count() as f64 / xs.len() as f64;
        assert!((pos - 0.5).abs() < 0.002, "{pos}");
        xs.sort_by(f64::total_cmp);
        let median = xs[xs.len() / 2];
        assert!(median.abs() < 3.0 * 2.4e-3 * 1e-3, "{median}");
    }

    #[test]
    fn sampler_rejects_bad_parameters() {
        assert!(StudentSampler::new(0.0, 1.0).is_err());
        assert!(StudentSampler::new(1.0, 0.0).is_err());
        assert!(StudentSampler::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn classify_boundary_is_market() {
        let g = grid();
        let (s, p) = (0.004, 3000.0);
        let threshold = s - 1.0 / p;
        assert_eq!(classify_order(threshold, s, p, &g), OrderClass::Market);
        assert_eq!(classify_order(threshold - 1e-12, s, p, &g), OrderClass::Limit(threshold - 1e-12));
        assert_eq!(classify_order(-0.01, s, p, &g), OrderClass::Limit(-0.01));
    }

    #[test]
    fn zero_offset_lands_on_same_best() {
        let q = quotes(2997, 3003);
        assert_eq!(limit_price_ticks(Side::Buy, 0.0, &q, 2997, 3003, &grid(), Rounding::Floor), Some(2997));
        assert_eq!(limit_price_ticks(Side::Sell, 0.0, &q, 2997, 3003, &grid(), Rounding::Floor), Some(3003));
    }

    #[test]
    fn negative_offset_rests_inside_book() {
        let q = quotes(2997, 3003);
        let buy = limit_price_ticks(Side::Buy, -0.01, &q, 2997, 3003, &grid(), Rounding::Floor).unwrap();
        let sell = limit_price_ticks(Side::Sell, -0.01, &q, 2997, 3003, &grid(), Rounding::Floor).unwrap();
        assert!(buy < 2997 && sell > 3003);
    }

    #[test]
    fn rounding_onto_opposite_best_is_refused() {
        let q = quotes(2999, 3001);
        // sell just inside the spread, floors onto the bid
        let x = q.ask - (2999.5f64).ln();
        assert_eq!(limit_price_ticks(Side::Sell, x, &q, 2999, 3001, &grid(), Rounding::Floor), None);
        // extreme draws clamp to the grid
        assert_eq!(limit_price_ticks(Side::Buy, -1e6, &q, 2999, 3001, &grid(), Rounding::Floor), Some(1));
        assert_eq!(limit_price_ticks(Side::Sell, -1e6, &q, 2999, 3001, &grid(), Rounding::Floor), Some(MAX_PRICE_TICKS));
    }

    #[test]
    fn rounding_modes_are_mirror_images() {
        let q = quotes(2990, 3010);
        // 2.4 ticks below the bid and above the ask
        let xb = (2987.6f64).ln() - q.bid;
        let xs = q.ask - (3012.4f64).ln();
        let g = grid();
        let at = |side, x, r| limit_price_ticks(side, x, &q, 2990, 3010, &g, r).unwrap();
        assert_eq!((at(Side::Buy, xb, Rounding::Passive), at(Side::Sell, xs, Rounding::Passive)), (2987, 3013));
        assert_eq!((at(Side::Buy, xb, Rounding::Nearest), at(Side::Sell, xs, Rounding::Nearest)), (2988, 3012));
        assert_eq!((at(Side::Buy, xb, Rounding::Floor), at(Side::Sell, xs, Rounding::Floor)), (2987, 3012));
        for r in [Rounding::Passive, Rounding::Nearest, Rounding::Floor] {
            assert_eq!(Rounding::parse(r.name()), Some(r));
            assert_eq!(at(Side::Buy, 0.0, r), 2990);
            assert_eq!(at(Side::Sell, 0.0, r), 3010);
        }
    }

    #[test]
    fn transaction_prob_limits() {
        assert!((transaction_prob(0.0, 2.4e-3, 1.31) - 0.5).abs() < 1e-12);
        assert!(transaction_prob(1e6, 2.4e-3, 1.31) < 1e-6);
        let mut last = 0.5;
        for k in 1..50 {
            let p = transaction_prob(k as f64 * 5e-4, 2.4e-3, 1.31);
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn effective_prob_shifts_threshold() {
        let p = effective_transaction_prob(0.002, 3000.0, 1.0, 2.4e-3, 1.31);
        assert!((p - transaction_prob(0.002 - 1.0 / 3000.0, 2.4e-3, 1.31)).abs() < 1e-15);
        assert!(p > transaction_prob(0.002, 2.4e-3, 1.31));
    }
}
