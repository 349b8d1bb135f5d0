use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check, fgn, FlowError};

/// Signs (+1 buy, -1 sell) of an exact fGn sample.
pub fn signs_fgn(n: usize, hurst: f64, seed: u64) -> Result<Vec<i8>, FlowError> {
    check("H_s", hurst, (0.5..1.0).contains(&hurst), "0.5 <= H_s < 1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = fgn(n, hurst, &mut rng)?;
    Ok(noise.into_iter().map(|v| if v >= 0.0 { 1 } else { -1 }).collect())
}

/// Order-splitting model of sign persistence.
///
/// A fixed number of hidden orders is active at any time. Each step one of
/// them, chosen uniformly, executes one unit and emits its sign. A finished
/// hidden order is replaced by a fresh one with a random sign and a size
/// drawn from `P(V > v) = v^-beta` (v >= 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenOrderParams {
    /// Tail exponent of hidden-order sizes.
    pub beta: f64,
    /// Number of simultaneously active hidden orders; each executes at rate
    /// `1 / concurrent` per step.
    pub concurrent: usize,
}

impl Default for HiddenOrderParams {
    fn default() -> Self {
        Self { beta: 1.59, concurrent: 10 }
    }
}

impl HiddenOrderParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        check("beta", self.beta, self.beta > 1.0, "> 1")?;
        check("concurrent", self.concurrent as f64, self.concurrent >= 1, ">= 1")
    }

    /// Autocorrelation exponent of the emitted sign series.
    pub fn gamma(&self) -> f64 {
        self.beta - 1.0
    }
}

struct HiddenOrder {
    sign: i8,
    remaining: u64,
}

fn fresh<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> HiddenOrder {
    let u: f64 = 1.0 - rng.random::<f64>();
    let size = u.powf(-1.0 / beta).ceil().min(u64::MAX as f64 / 2.0) as u64;
    let sign = if rng.random::<bool>() { 1 } else { -1 };
    HiddenOrder { sign, remaining: size.max(1) }
}

pub fn signs_hidden_order(n: usize, params: HiddenOrderParams, seed: u64) -> Result<Vec<i8>, FlowError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active: Vec<HiddenOrder> = (0..params.concurrent).map(|_| fresh(params.beta, &mut rng)).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.random_range(0..active.len());
        let order = &mut active[i];
        out.push(order.sign);
        order.remaining -= 1;
        if order.remaining == 0 {
            active[i] = fresh(params.beta, &mut rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fgn_signs_at_half_are_fair_coin() {
        let s = signs_fgn(1_000_000, 0.5, 11).unwrap();
        let agree = s.windows(2).filter(|w| w[0] == w[1]).count() as f64 / (s.len() - 1) as f64;
        assert!((agree - 0.5).abs() < 0.002, "{agree}");
        let buys = s.iter().filter(|&&v| v == 1).count() as f64 / s.len() as f64;
        assert!((buys - 0.5).abs() < 0.002);
    }

    #[test]
    fn fgn_signs_deterministic_and_validated() {
        assert_eq!(signs_fgn(5000, 0.8, 4).unwrap(), signs_fgn(5000, 0.8, 4).unwrap());
        assert_ne!(signs_fgn(5000, 0.8, 4).unwrap(), signs_fgn(5000, 0.8, 5).unwrap());
        assert!(signs_fgn(10, 0.4, 1).is_err());
        assert!(signs_fgn(10, 1.0, 1).is_err());
    }

    #[test]
    fn hidden_orders_require_integrable_sizes() {
        let p = HiddenOrderParams { beta: 1.0, concurrent: 5 };
        assert!(signs_hidden_order(10, p, 1).is_err());
        assert!((HiddenOrderParams { beta: 2.0, concurrent: 1 }.gamma() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_active_order_emits_constant_runs() {
        // one active hidden order at a time: the series is a concatenation of
        // constant-sign runs whose lengths are the hidden-order sizes; with
        // beta near one the largest of them spans thousands of steps
        let p = HiddenOrderParams { beta: 1.05, concurrent: 1 };
        let s = signs_hidden_order(100_000, p, 2).unwrap();
        let mut longest = 0;
        let mut run = 0;
        for w in s.windows(2) {
            run = if w[0] == w[1] { run + 1 } else { 0 };
            longest = longest.max(run + 1);
        }
        assert!(longest > 1000, "longest run {longest}");
    }
}
