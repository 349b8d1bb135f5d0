//! The three stochastic ingredients of order flow: signs, relative limit
//! prices and cancellations.

mod cancel;
mod fgn;
mod placement;
mod signs;

pub use cancel::{cancel_prob, CancellationInputs};
pub(crate) use cancel::cancel_prob_unchecked;
pub use fgn::{fgn, fgn_levinson};
pub use placement::{
    classify_order, effective_transaction_prob, limit_price_ticks, transaction_prob, OrderClass,
    Rounding, StudentSampler, MAX_PRICE_TICKS,
};
pub use signs::{signs_fgn, signs_hidden_order, HiddenOrderParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("parameter {name} = {value} out of range: {expected}")]
    Parameter { name: &'static str, value: f64, expected: &'static str },
}

pub(crate) fn check(name: &'static str, value: f64, ok: bool, expected: &'static str) -> Result<(), FlowError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(FlowError::Parameter { name, value, expected })
    }
}

/// Parameters of the order-flow model for one stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Hurst exponent of the order-sign series.
    pub hurst: f64,
    /// Degrees of freedom of the relative-price Student distribution.
    pub alpha_x: f64,
    /// Scale of the relative-price distribution (log-price units).
    pub sigma_x: f64,
    /// Cancellation amplitude `A`.
    pub cancel_scale: f64,
    /// Imbalance offset `B`.
    pub imbalance_offset: f64,
    pub tick_size: f64,
    /// Initial price in currency units.
    pub p0: f64,
    pub seed: u64,
}

impl FlowParams {
    /// AstraZeneca row of the cross-sectional fit, priced at 3000 pence.
    pub fn azn() -> Self {
        Self {
            hurst: 0.77,
            alpha_x: 1.31,
            sigma_x: 2.4e-3,
            cancel_scale: 1.12,
            imbalance_offset: 0.20,
            tick_size: 1.0,
            p0: 3000.0,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        check("H_s", self.hurst, (0.5..1.0).contains(&self.hurst), "0.5 <= H_s < 1")?;
        check("alpha_x", self.alpha_x, self.alpha_x > 0.0, "> 0")?;
        check("sigma_x", self.sigma_x, self.sigma_x > 0.0, "> 0")?;
        check("A", self.cancel_scale, self.cancel_scale >= 0.0, ">= 0")?;
        check("B", self.imbalance_offset, self.imbalance_offset >= 0.0, ">= 0")?;
        check("T", self.tick_size, self.tick_size > 0.0, "> 0")?;
        check("p0", self.p0, self.p0 > 0.0, "> 0")?;
        Ok(())
    }
}

impl Default for FlowParams {
    fn default() -> Self {
        Self::azn()
    }
}
