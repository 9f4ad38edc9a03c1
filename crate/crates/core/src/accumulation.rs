//! Accumulation-phase detection and the cross-event summaries built on it:
//! prevalence, span statistics, span histogram, spike delays, pre-pump
//! volume concentration and archetype classification.
//!
//! Only candles strictly before the target date are ever inspected, and only
//! candles with `quantity > 0` count as trading activity.

use std::fmt;
use std::num::NonZeroU32;

use thiserror::Error;

use crate::model::{AccumulationSpan, EventWindow, Timestamp};
use crate::scalar::Scalar;

/// Default archetype threshold and concentration horizon, in minutes.
pub const DEFAULT_HORIZON_MINUTES: u32 = 60;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AccumulationError {
    #[error("no accumulation events")]
    NoAccumulationEvents,
}

/// Scans the pre-pump candles in ascending order and returns the first and
/// last minute with non-zero traded quantity.
pub fn compute_accumulation_span<S: Scalar>(w: &EventWindow<S>) -> AccumulationSpan {
    let target = w.target_date();
    let mut start: Option<Timestamp> = None;
    let mut end: Option<Timestamp> = None;
    for c in w.candles() {
        if c.timestamp >= target {
            break;
        }
        if c.quantity > S::zero() {
            if start.is_none() {
                start = Some(c.timestamp);
            }
            end = Some(c.timestamp);
        }
    }
    match (start, end) {
        (Some(s), Some(e)) => AccumulationSpan::new(s, e, target).expect("ascending pre-pump scan"),
        _ => AccumulationSpan::ABSENT,
    }
}

/// Span length in whole minutes; a single active minute counts as 1.
pub fn span_minutes(s: &AccumulationSpan) -> Option<u64> {
    s.bounds()
        .map(|(start, end)| start.minutes_until(end).max(1) as u64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrevalenceReport {
    pub total_events: usize,
    pub with_accumulation: usize,
    pub without_accumulation: usize,
    pub with_pct: f64,
    pub without_pct: f64,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn prevalence(spans: &[AccumulationSpan]) -> PrevalenceReport {
    let total = spans.len();
    let with = spans.iter().filter(|s| s.is_present()).count();
    let (with_pct, without_pct) = if total == 0 {
        (0.0, 0.0)
    } else {
        let w = round1(100.0 * with as f64 / total as f64);
        (w, round1(100.0 - w))
    };
    PrevalenceReport {
        total_events: total,
        with_accumulation: with,
        without_accumulation: total - with,
        with_pct,
        without_pct,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpanStats {
    pub minimum: u64,
    pub average: f64,
    pub maximum: u64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub count: usize,
}

/// Min, mean, max and population standard deviation of the present spans.
pub fn span_stats(spans: &[AccumulationSpan]) -> Result<SpanStats, AccumulationError> {
    let minutes: Vec<u64> = spans.iter().filter_map(span_minutes).collect();
    if minutes.is_empty() {
        return Err(AccumulationError::NoAccumulationEvents);
    }
    let n = minutes.len() as u128;
    let sum: u128 = minutes.iter().map(|&m| m as u128).sum();
    let sum_sq: u128 = minutes.iter().map(|&m| (m as u128) * (m as u128)).sum();
    // n²·variance = n·Σx² − (Σx)², exact in integers
    let scaled_var = n * sum_sq - sum * sum;
    Ok(SpanStats {
        minimum: *minutes.iter().min().unwrap(),
        average: sum as f64 / n as f64,
        maximum: *minutes.iter().max().unwrap(),
        std_dev: (scaled_var as f64).sqrt() / n as f64,
        count: minutes.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub bin_width_minutes: u32,
    /// `(lower_bound_minutes, count)`, contiguous from 0.
    pub bins: Vec<(u64, usize)>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.1).sum()
    }
}

/// Contiguous bins `[0, w), [w, 2w), …` up to the longest present span.
pub fn span_histogram(spans: &[AccumulationSpan], bin_width_minutes: NonZeroU32) -> Histogram {
    let width = bin_width_minutes.get() as u64;
    let minutes: Vec<u64> = spans.iter().filter_map(span_minutes).collect();
    let bins = match minutes.iter().max() {
        None => Vec::new(),
        Some(&max) => {
            let mut counts = vec![0usize; (max / width) as usize + 1];
            for m in &minutes {
                counts[(m / width) as usize] += 1;
            }
            counts
                .into_iter()
                .enumerate()
                .map(|(i, c)| (i as u64 * width, c))
                .collect()
        }
    };
    Histogram { bin_width_minutes: bin_width_minutes.get(), bins }
}

/// One pre-pump minute with traded volume, measured back from the target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeDelay<S> {
    /// `target_date − timestamp` in minutes, always ≥ 1.
    pub delay_minutes: u64,
    pub quantity: S,
}

/// Every pre-pump candle with `quantity > 0`, nearest to the target first.
pub fn spike_delays<S: Scalar>(w: &EventWindow<S>) -> Vec<SpikeDelay<S>> {
    let target = w.target_date();
    w.pre_pump()
        .iter()
        .rev()
        .filter(|c| c.quantity > S::zero())
        .map(|c| SpikeDelay {
            delay_minutes: c.timestamp.minutes_until(target) as u64,
            quantity: c.quantity,
        })
        .collect()
}

/// Pre-pump volume traded within `horizon_minutes` of the target date and
/// the total pre-pump volume.
pub fn pre_pump_volume_split<S: Scalar>(w: &EventWindow<S>, horizon_minutes: u32) -> (S, S) {
    let target = w.target_date();
    let mut inside = S::zero();
    let mut total = S::zero();
    for c in w.pre_pump() {
        if c.quantity > S::zero() {
            total = total + c.quantity;
            if c.timestamp.minutes_until(target) <= horizon_minutes as i64 {
                inside = inside + c.quantity;
            }
        }
    }
    (inside, total)
}

/// Fraction of pre-pump volume traded within `horizon_minutes` of the
/// target date. `None` when there is no pre-pump volume at all.
pub fn volume_concentration<S: Scalar>(w: &EventWindow<S>, horizon_minutes: u32) -> Option<S> {
    let (inside, total) = pre_pump_volume_split(w, horizon_minutes);
    if total > S::zero() {
        Some(inside / total)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Archetype {
    PreAccumulated,
    OnTheSpot,
}

impl Archetype {
    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::PreAccumulated => "pre-accumulated",
            Archetype::OnTheSpot => "on-the-spot",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// On-the-spot when there is no span, or the whole span lies within
/// `threshold_minutes` of the target date; pre-accumulated otherwise.
pub fn classify_archetype<S: Scalar>(
    s: &AccumulationSpan,
    w: &EventWindow<S>,
    threshold_minutes: u32,
) -> Archetype {
    match s.accum_start() {
        None => Archetype::OnTheSpot,
        Some(start) if start.minutes_until(w.target_date()) <= threshold_minutes as i64 => {
            Archetype::OnTheSpot
        }
        Some(_) => Archetype::PreAccumulated,
    }
}
