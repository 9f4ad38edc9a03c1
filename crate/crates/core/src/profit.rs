//! Lower-bound insider profit estimates.
//!
//! Each event with a detected accumulation span yields one set of inputs:
//! accumulated volume `V`, first-trade price `P₁`, accumulation VWAP and the
//! post-target peak high `H`. Four scenarios cross the two purchase-price
//! proxies with the two liquidation schedules:
//!
//! | scenario | cost basis | liquidation              |
//! |----------|------------|--------------------------|
//! | A        | `P₁`       | all at `0.70·H`          |
//! | B        | `P₁`       | 20/30/50 % at 50/60/80 % of `H` |
//! | C        | VWAP       | all at `0.70·H`          |
//! | D        | VWAP       | 20/30/50 % at 50/60/80 % of `H` |
//!
//! `profit_abs = proceeds − cost` and `profit_pct = 100·profit_abs/cost`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{AccumulationSpan, EventKey, EventWindow};
use crate::scalar::Scalar;
use crate::stats;

/// Fraction of the peak realised by the single-point liquidation.
pub const SINGLE_POINT_FRACTION: f64 = 0.70;

/// `(share of volume, fraction of peak)` for each tranche.
pub const TRANCHES: [(f64, f64); 3] = [(0.20, 0.50), (0.30, 0.60), (0.50, 0.80)];

/// Percentiles reported alongside means and medians.
pub const REPORTED_PERCENTILES: [u8; 4] = [5, 25, 75, 95];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfitError {
    #[error("no accumulation")]
    NoAccumulation,
    #[error("undefined VWAP: zero traded volume in the accumulation span")]
    ZeroVolume,
    #[error("no candle at accum_start")]
    MissingFirstTrade,
    #[error("no pump window data")]
    NoPumpWindowData,
    #[error("no events to aggregate")]
    NoEvents,
}

/// Per-candle price used inside the VWAP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PriceField {
    #[default]
    Close,
    /// `(high + low + close) / 3`
    Typical,
}

impl PriceField {
    pub fn as_str(self) -> &'static str {
        match self {
            PriceField::Close => "close",
            PriceField::Typical => "typical",
        }
    }
}

impl FromStr for PriceField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "close" => Ok(PriceField::Close),
            "typical" => Ok(PriceField::Typical),
            other => Err(format!("unknown price field `{other}` (expected close or typical)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LiquidationMode {
    Single,
    Tranche,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CostProxy {
    FirstTrade,
    Vwap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioId {
    A,
    B,
    C,
    D,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [ScenarioId::A, ScenarioId::B, ScenarioId::C, ScenarioId::D];

    pub fn proxy(self) -> CostProxy {
        match self {
            ScenarioId::A | ScenarioId::B => CostProxy::FirstTrade,
            ScenarioId::C | ScenarioId::D => CostProxy::Vwap,
        }
    }

    pub fn mode(self) -> LiquidationMode {
        match self {
            ScenarioId::A | ScenarioId::C => LiquidationMode::Single,
            ScenarioId::B | ScenarioId::D => LiquidationMode::Tranche,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::A => "A",
            ScenarioId::B => "B",
            ScenarioId::C => "C",
            ScenarioId::D => "D",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sum of quantity over candles in `[accum_start, accum_end]`.
pub fn accumulated_volume<S: Scalar>(w: &EventWindow<S>, s: &AccumulationSpan) -> Result<S, ProfitError> {
    let (start, end) = s.bounds().ok_or(ProfitError::NoAccumulation)?;
    Ok(w.range(start, end).iter().map(|c| c.quantity).sum())
}

/// Open of the candle at `accum_start`, i.e. the first trade of the span.
pub fn first_trade_price<S: Scalar>(w: &EventWindow<S>, s: &AccumulationSpan) -> Result<S, ProfitError> {
    let start = s.accum_start().ok_or(ProfitError::NoAccumulation)?;
    w.candle_at(start).map(|c| c.open).ok_or(ProfitError::MissingFirstTrade)
}

/// `Σ P_t·V_t / Σ V_t` over span candles with `V_t > 0`.
pub fn vwap<S: Scalar>(w: &EventWindow<S>, s: &AccumulationSpan, field: PriceField) -> Result<S, ProfitError> {
    let (start, end) = s.bounds().ok_or(ProfitError::NoAccumulation)?;
    let mut notional = S::zero();
    let mut volume = S::zero();
    for c in w.range(start, end).iter().filter(|c| c.quantity > S::zero()) {
        let price = match field {
            PriceField::Close => c.close,
            PriceField::Typical => c.typical_price(),
        };
        notional = notional + price * c.quantity;
        volume = volume + c.quantity;
    }
    if volume > S::zero() {
        Ok(notional / volume)
    } else {
        Err(ProfitError::ZeroVolume)
    }
}

/// Highest high in `[target_date, target_date + 2 days]`.
pub fn peak_high<S: Scalar>(w: &EventWindow<S>) -> Result<S, ProfitError> {
    w.range(w.target_date(), w.key().window_end())
        .iter()
        .map(|c| c.high)
        .reduce(S::max)
        .ok_or(ProfitError::NoPumpWindowData)
}

pub fn liquidation_proceeds<S: Scalar>(volume: S, peak: S, mode: LiquidationMode) -> S {
    match mode {
        LiquidationMode::Single => volume * (S::lit(SINGLE_POINT_FRACTION) * peak),
        LiquidationMode::Tranche => TRANCHES
            .iter()
            .map(|&(share, fraction)| (S::lit(share) * volume) * (S::lit(fraction) * peak))
            .fold(S::zero(), |acc, x| acc + x),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfitInputs<S> {
    pub accumulated_volume: S,
    pub first_trade_price: S,
    pub vwap_price: S,
    pub peak_high: S,
}

impl<S: Scalar> ProfitInputs<S> {
    pub fn proxy_price(&self, proxy: CostProxy) -> S {
        match proxy {
            CostProxy::FirstTrade => self.first_trade_price,
            CostProxy::Vwap => self.vwap_price,
        }
    }
}

/// One scenario's outcome for one event, with every intermediate recorded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfitEstimate<S> {
    pub scenario: ScenarioId,
    pub volume: S,
    pub proxy_price: S,
    pub peak_high: S,
    pub cost: S,
    pub proceeds: S,
    pub profit_abs: S,
    pub profit_pct: S,
}

pub fn estimate_profit<S: Scalar>(inputs: &ProfitInputs<S>, scenario: ScenarioId) -> ProfitEstimate<S> {
    let volume = inputs.accumulated_volume;
    let price = inputs.proxy_price(scenario.proxy());
    let cost = volume * price;
    let proceeds = liquidation_proceeds(volume, inputs.peak_high, scenario.mode());
    let profit_abs = proceeds - cost;
    ProfitEstimate {
        scenario,
        volume,
        proxy_price: price,
        peak_high: inputs.peak_high,
        cost,
        proceeds,
        profit_abs,
        profit_pct: S::lit(100.0) * profit_abs / cost,
    }
}

/// All four scenarios for one event.
#[derive(Clone, Debug, PartialEq)]
pub struct EventProfit<S> {
    pub key: EventKey,
    pub inputs: ProfitInputs<S>,
    pub estimates: [ProfitEstimate<S>; 4],
}

pub fn profit_inputs<S: Scalar>(
    w: &EventWindow<S>,
    s: &AccumulationSpan,
    field: PriceField,
) -> Result<ProfitInputs<S>, ProfitError> {
    let accumulated_volume = accumulated_volume(w, s)?;
    if accumulated_volume <= S::zero() {
        return Err(ProfitError::ZeroVolume);
    }
    Ok(ProfitInputs {
        accumulated_volume,
        first_trade_price: first_trade_price(w, s)?,
        vwap_price: vwap(w, s, field)?,
        peak_high: peak_high(w)?,
    })
}

/// Computes the inputs once, then every scenario. A failed precondition
/// yields no estimates; the error is the skip reason.
pub fn run_event<S: Scalar>(
    w: &EventWindow<S>,
    s: &AccumulationSpan,
    field: PriceField,
) -> Result<EventProfit<S>, ProfitError> {
    let inputs = profit_inputs(w, s, field)?;
    Ok(EventProfit {
        key: w.key().clone(),
        inputs,
        estimates: ScenarioId::ALL.map(|id| estimate_profit(&inputs, id)),
    })
}

/// Mean, median and percentiles of one metric across events.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<S> {
    pub mean: S,
    pub median: S,
    /// Keyed by percentile (5, 25, 75, 95).
    pub percentiles: BTreeMap<u8, S>,
}

impl<S: Scalar> Distribution<S> {
    fn of(values: impl IntoIterator<Item = S>) -> Option<Self> {
        let sorted = stats::sorted(values);
        Some(Distribution {
            mean: stats::mean_sorted(&sorted)?,
            median: stats::median_sorted(&sorted)?,
            percentiles: REPORTED_PERCENTILES
                .iter()
                .map(|&p| (p, stats::percentile_sorted(&sorted, p as f64).unwrap()))
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioAggregate<S> {
    pub scenario: ScenarioId,
    pub profit_abs: Distribution<S>,
    pub profit_pct: Distribution<S>,
    pub event_count: usize,
}

impl<S: Scalar> ScenarioAggregate<S> {
    pub fn avg_profit_abs(&self) -> S {
        self.profit_abs.mean
    }

    pub fn median_profit_abs(&self) -> S {
        self.profit_abs.median
    }

    pub fn avg_profit_pct(&self) -> S {
        self.profit_pct.mean
    }

    pub fn median_profit_pct(&self) -> S {
        self.profit_pct.median
    }
}

/// Cross-event statistics per scenario. Values are sorted before every
/// reduction, so the result does not depend on event order.
pub fn aggregate<S: Scalar>(events: &[EventProfit<S>]) -> Result<[ScenarioAggregate<S>; 4], ProfitError> {
    if events.is_empty() {
        return Err(ProfitError::NoEvents);
    }
    Ok(ScenarioId::ALL.map(|id| {
        let rows = || events.iter().map(move |e| &e.estimates[id.index()]);
        ScenarioAggregate {
            scenario: id,
            profit_abs: Distribution::of(rows().map(|r| r.profit_abs)).unwrap(),
            profit_pct: Distribution::of(rows().map(|r| r.profit_pct)).unwrap(),
            event_count: events.len(),
        }
    }))
}
