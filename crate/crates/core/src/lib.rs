//! Forensics for cryptocurrency pump-and-dump events in minute OHLCV data.
//!
//! Given flagged `{symbol, target_date}` events and the candles around
//! them, the crate finds the pre-pump accumulation span of each event,
//! summarises spans across events, and bounds insider profits under four
//! cost-basis/liquidation scenarios. A seeded generator produces synthetic
//! events with known ground truth for testing every stage.
//!
//! Price and volume types are generic over [`Scalar`] (`f64` or `f32`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod accumulation;
pub mod ingestion;
pub mod model;
pub mod pipeline;
pub mod profit;
pub mod report;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use accumulation::{
    classify_archetype, compute_accumulation_span, prevalence, span_histogram, span_minutes, span_stats,
    spike_delays, volume_concentration, Archetype, Histogram, PrevalenceReport, SpanStats,
};
pub use model::{validate_candle, AccumulationSpan, CandleRule, EventKey, Timestamp};
pub use profit::{LiquidationMode, PriceField, ScenarioId};
pub use scalar::Scalar;

pub type Candle = model::Candle<f64>;
pub type EventWindow = model::EventWindow<f64>;
pub type ProfitInputs = profit::ProfitInputs<f64>;
pub type ProfitEstimate = profit::ProfitEstimate<f64>;
pub type EventProfit = profit::EventProfit<f64>;
pub type ScenarioAggregate = profit::ScenarioAggregate<f64>;
pub type SpikeDelay = accumulation::SpikeDelay<f64>;
pub type GroundTruth = synth::GroundTruth<f64>;
pub type SynthConfig = synth::SynthConfig<f64>;

pub type CandleF32 = model::Candle<f32>;
pub type EventWindowF32 = model::EventWindow<f32>;
pub type ProfitInputsF32 = profit::ProfitInputs<f32>;
pub type ProfitEstimateF32 = profit::ProfitEstimate<f32>;
