//! Parameter estimation from order-event logs.

mod cancel;
mod load;
mod placement;

use serde::Serialize;
use thiserror::Error;

use crate::events::{Clock, EventKind, OrderEvent};
use crate::stats::{dfa_hurst_default, HurstEstimate, StatsError};

pub use cancel::{assemble_scale, fit_cancellation, CancelBins, CancellationFit, CurvePoint, JointCancelFit};
pub use load::{infer_tick_size, load_events, validate_replay, EventLog};
pub use placement::{
    empirical_transaction_curve, extract_placements, filter_placements, fit_student, fit_student_censored, reconstruct_pstar,
    BinSpec, FitMethod, Filtered, FilterRules, PStar, PlacementFit, PlacementRecord, Rejections, TransactionBin, WeightedBin,
};

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event {index}: {message}")]
    Integrity { index: usize, message: String },
    #[error("not enough data: {0}")]
    Insufficient(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Hurst exponent of the placement signs, limit and market orders pooled.
pub fn calibrate_hurst(events: &[OrderEvent]) -> Result<HurstEstimate, CalibError> {
    let signs: Vec<f64> =
        events.iter().filter(|e| e.kind != EventKind::Cancel).map(|e| e.side.sign() as f64).collect();
    if signs.len() < 10_000 {
        return Err(CalibError::Insufficient(format!("need 10000 placements, have {}", signs.len())));
    }
    Ok(dfa_hurst_default(&signs)?)
}

/// Which cancellation fit supplies the reported `A` and `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CancelEstimator {
    /// Joint likelihood of every order observation.
    #[default]
    Joint,
    /// Product of the three one-variable curves, `A = K1 K2 K3 / P(C)^2`.
    /// Exact only when `y`, `n_imb` and `n_tot` are independent.
    Factorized,
}

impl CancelEstimator {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "joint" => Some(Self::Joint),
            "factorized" => Some(Self::Factorized),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Joint => "joint",
            Self::Factorized => "factorized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOptions {
    /// Tick size; inferred from the prices when absent.
    pub tick: Option<f64>,
    pub filter: FilterRules,
    /// Spread condition for the placement reconstruction.
    pub s0: f64,
    pub pstar_bins: BinSpec,
    pub cancel_bins: CancelBins,
    pub cancel_estimator: CancelEstimator,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            tick: None,
            filter: FilterRules::default(),
            s0: 0.0,
            pstar_bins: BinSpec::default(),
            cancel_bins: CancelBins::default(),
            cancel_estimator: CancelEstimator::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationDiagnostics {
    pub events: usize,
    pub clock: &'static str,
    pub tick_inferred: bool,
    pub cancel_estimator: CancelEstimator,
    pub placements: usize,
    pub placements_kept: usize,
    pub rejected: Rejections,
    /// The fit reported as `alpha_x`, `sigma_x`.
    pub placement: PlacementFit,
    /// Weighted fit to the reconstructed distribution, for comparison.
    pub placement_weighted: Option<PlacementFit>,
    pub pstar_n: usize,
    pub pstar_dropped: usize,
    pub pstar_bins: Vec<WeightedBin>,
    pub hurst: HurstEstimate,
    pub cancellation: CancellationFit,
    pub transaction_curve: Vec<TransactionBin>,
}

/// Fitted model parameters with the fits they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    #[serde(rename = "H_s")]
    pub hurst: f64,
    pub alpha_x: f64,
    pub sigma_x: f64,
    #[serde(rename = "A")]
    pub cancel_scale: f64,
    #[serde(rename = "B")]
    pub imbalance_offset: f64,
    #[serde(rename = "T")]
    pub tick_size: f64,
    pub diagnostics: CalibrationDiagnostics,
}

/// Run every fit on one log.
pub fn calibrate(log: &EventLog, options: &CalibrationOptions) -> Result<CalibrationReport, CalibError> {
    options.filter.validate()?;
    if log.events.is_empty() {
        return Err(CalibError::Insufficient("the log has no events".into()));
    }
    let (tick, tick_inferred) = match options.tick {
        Some(t) if t > 0.0 && t.is_finite() => (t, false),
        Some(t) => return Err(CalibError::Config(format!("tick size {t} must be positive"))),
        None => (
            infer_tick_size(&log.events).ok_or_else(|| CalibError::Config("cannot infer a tick size; pass one".into()))?,
            true,
        ),
    };
    let placements = extract_placements(log, tick)?;
    let filtered = filter_placements(&placements, &options.filter, log.clock);
    let pstar = reconstruct_pstar(&filtered.kept, options.s0, &options.pstar_bins)?;
    let placement = fit_student_censored(&filtered.kept)?;
    let placement_weighted = fit_student(&pstar.samples).ok();
    let hurst = calibrate_hurst(&log.events)?;
    let cancellation = fit_cancellation(log, tick, &options.cancel_bins)?;
    let transaction_curve = empirical_transaction_curve(&filtered.kept, &placement, tick);
    let (a, b) = match options.cancel_estimator {
        CancelEstimator::Joint => (cancellation.joint.a, cancellation.joint.b),
        CancelEstimator::Factorized => (cancellation.a, cancellation.b),
    };
    Ok(CalibrationReport {
        hurst: hurst.hurst,
        alpha_x: placement.alpha_x,
        sigma_x: placement.sigma_x,
        cancel_scale: a,
        imbalance_offset: b,
        tick_size: tick,
        diagnostics: CalibrationDiagnostics {
            events: log.events.len(),
            clock: match log.clock {
                Clock::EventTime => "step",
                Clock::WallClock => "timestamp",
            },
            tick_inferred,
            cancel_estimator: options.cancel_estimator,
            placements: placements.len(),
            placements_kept: filtered.kept.len(),
            rejected: filtered.rejected,
            placement,
            placement_weighted,
            pstar_n: pstar.n,
            pstar_dropped: pstar.dropped,
            pstar_bins: pstar.bins,
            hurst,
            cancellation,
            transaction_curve,
        },
    })
}
