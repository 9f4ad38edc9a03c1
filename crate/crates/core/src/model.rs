//! Shared domain types: minute-aligned UTC instants, OHLCV candles, event
//! keys, per-event analysis windows and accumulation spans.

use std::fmt;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::scalar::Scalar;

pub const MINUTE_MS: i64 = 60_000;
/// Minutes of history kept before the target date (four days).
pub const WINDOW_BEFORE_MINUTES: i64 = 4 * 24 * 60;
/// Minutes kept after the target date (two days).
pub const WINDOW_AFTER_MINUTES: i64 = 2 * 24 * 60;

/// UTC instant in integer milliseconds since the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid timestamp `{0}`: expected ISO-8601 UTC or integer epoch milliseconds")]
pub struct TimestampParseError(pub String);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn as_millis(self) -> i64 {
        self.0
    }

    pub fn is_minute_aligned(self) -> bool {
        self.0.rem_euclid(MINUTE_MS) == 0
    }

    pub fn truncate_to_minute(self) -> Self {
        Timestamp(self.0 - self.0.rem_euclid(MINUTE_MS))
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Timestamp(self.0 + minutes * MINUTE_MS)
    }

    /// Whole minutes from `self` to `later` (floor division).
    pub fn minutes_until(self, later: Timestamp) -> i64 {
        (later.0 - self.0).div_euclid(MINUTE_MS)
    }

    /// Accepts integer epoch milliseconds, RFC 3339, or a naive
    /// `YYYY-MM-DDTHH:MM[:SS]` that is taken to be UTC.
    pub fn parse(s: &str) -> Result<Self, TimestampParseError> {
        let s = s.trim();
        if let Ok(ms) = s.parse::<i64>() {
            return Ok(Timestamp(ms));
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Timestamp(dt.with_timezone(&Utc).timestamp_millis()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp(naive.and_utc().timestamp_millis()));
            }
        }
        Err(TimestampParseError(s.to_owned()))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp_millis(self.0).expect("timestamp within chrono range")
    }

    /// Compact form used in file names, e.g. `20241201T1400Z`.
    pub fn compact(self) -> String {
        self.to_datetime().format("%Y%m%dT%H%MZ").to_string()
    }
}

impl std::str::FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_datetime().to_rfc3339_opts(SecondsFormat::Secs, true))
    }
}

/// One minute of OHLCV market data. `quantity` is base-asset volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candle<S> {
    pub timestamp: Timestamp,
    pub open: S,
    pub high: S,
    pub low: S,
    pub close: S,
    pub quantity: S,
}

/// The candle invariant that a record violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum CandleRule {
    #[error("price or quantity is not finite")]
    NonFinite,
    #[error("all prices must be > 0")]
    NonPositivePrice,
    #[error("low > high")]
    LowAboveHigh,
    #[error("high < max(open, close)")]
    HighBelowBody,
    #[error("low > min(open, close)")]
    LowAboveBody,
    #[error("negative quantity")]
    NegativeQuantity,
    #[error("timestamp is not minute-aligned")]
    NotMinuteAligned,
}

impl<S: Scalar> Candle<S> {
    pub fn new(timestamp: Timestamp, open: S, high: S, low: S, close: S, quantity: S) -> Self {
        Candle { timestamp, open, high, low, close, quantity }
    }

    /// Flat candle: all four prices equal.
    pub fn flat(timestamp: Timestamp, price: S, quantity: S) -> Self {
        Candle::new(timestamp, price, price, price, price, quantity)
    }

    /// `(high + low + close) / 3`.
    pub fn typical_price(&self) -> S {
        (self.high + self.low + self.close) / S::lit(3.0)
    }
}

/// Checks every candle invariant, reporting the first one violated.
///
/// Price comparisons allow the scalar's relative tolerance so that decimal
/// noise from exchange payloads does not reject otherwise consistent bars.
pub fn validate_candle<S: Scalar>(c: &Candle<S>) -> Result<(), CandleRule> {
    let fields = [c.open, c.high, c.low, c.close, c.quantity];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(CandleRule::NonFinite);
    }
    if [c.open, c.high, c.low, c.close].iter().any(|&p| p <= S::zero()) {
        return Err(CandleRule::NonPositivePrice);
    }
    let tol = S::rel_tolerance();
    let below = |a: S, b: S| a < b * (S::one() - tol);
    if below(c.high, c.low) {
        return Err(CandleRule::LowAboveHigh);
    }
    if below(c.high, c.open.max(c.close)) {
        return Err(CandleRule::HighBelowBody);
    }
    if below(c.open.min(c.close), c.low) {
        return Err(CandleRule::LowAboveBody);
    }
    if c.quantity < S::zero() {
        return Err(CandleRule::NegativeQuantity);
    }
    if !c.timestamp.is_minute_aligned() {
        return Err(CandleRule::NotMinuteAligned);
    }
    Ok(())
}

/// Identifies one flagged event. A symbol may carry several target dates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventKey {
    pub symbol: String,
    pub target_date: Timestamp,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventKeyError {
    #[error("symbol must be non-empty")]
    EmptySymbol,
    #[error("target date {0} is not minute-aligned")]
    NotMinuteAligned(Timestamp),
}

impl EventKey {
    pub fn new(symbol: impl Into<String>, target_date: Timestamp) -> Result<Self, EventKeyError> {
        let symbol = symbol.into();
        if symbol.trim().is_empty() {
            return Err(EventKeyError::EmptySymbol);
        }
        if !target_date.is_minute_aligned() {
            return Err(EventKeyError::NotMinuteAligned(target_date));
        }
        Ok(EventKey { symbol, target_date })
    }

    /// First minute of the analysis window (inclusive).
    pub fn window_start(&self) -> Timestamp {
        self.target_date.plus_minutes(-WINDOW_BEFORE_MINUTES)
    }

    /// Last minute of the analysis window (inclusive).
    pub fn window_end(&self) -> Timestamp {
        self.target_date.plus_minutes(WINDOW_AFTER_MINUTES)
    }

    pub fn window_contains(&self, ts: Timestamp) -> bool {
        ts >= self.window_start() && ts <= self.window_end()
    }

    /// Quote currency, taken as the part after the last `_` (`BTC_USDT` → `USDT`).
    pub fn quote_currency(&self) -> Option<&str> {
        self.symbol.rsplit_once('_').map(|(_, q)| q).filter(|q| !q.is_empty())
    }
}

impl fmt::Display for EventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.symbol, self.target_date)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("candles not strictly ascending at index {0}")]
    Unsorted(usize),
    #[error("candle at {0} lies outside the event window")]
    OutOfWindow(Timestamp),
    #[error("candle at {ts}: {rule}")]
    InvalidCandle { ts: Timestamp, rule: CandleRule },
}

/// All candles of one event inside `[target − 4 days, target + 2 days]`.
/// May be sparse: absent minutes are simply missing.
#[derive(Clone, Debug, PartialEq)]
pub struct EventWindow<S> {
    key: EventKey,
    candles: Vec<Candle<S>>,
}

impl<S: Scalar> EventWindow<S> {
    pub fn new(key: EventKey, candles: Vec<Candle<S>>) -> Result<Self, WindowError> {
        for (i, c) in candles.iter().enumerate() {
            validate_candle(c).map_err(|rule| WindowError::InvalidCandle { ts: c.timestamp, rule })?;
            if !key.window_contains(c.timestamp) {
                return Err(WindowError::OutOfWindow(c.timestamp));
            }
            if i > 0 && candles[i - 1].timestamp >= c.timestamp {
                return Err(WindowError::Unsorted(i));
            }
        }
        Ok(EventWindow { key, candles })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn new_unchecked(key: EventKey, candles: Vec<Candle<S>>) -> Self {
        EventWindow { key, candles }
    }

    pub fn key(&self) -> &EventKey {
        &self.key
    }

    pub fn target_date(&self) -> Timestamp {
        self.key.target_date
    }

    pub fn candles(&self) -> &[Candle<S>] {
        &self.candles
    }

    pub fn into_candles(self) -> Vec<Candle<S>> {
        self.candles
    }

    /// Candles strictly before the target date.
    pub fn pre_pump(&self) -> &[Candle<S>] {
        let split = self.candles.partition_point(|c| c.timestamp < self.key.target_date);
        &self.candles[..split]
    }

    /// Candles from the target date onwards.
    pub fn post_target(&self) -> &[Candle<S>] {
        let split = self.candles.partition_point(|c| c.timestamp < self.key.target_date);
        &self.candles[split..]
    }

    /// Candles with timestamp in `[from, to]`.
    pub fn range(&self, from: Timestamp, to: Timestamp) -> &[Candle<S>] {
        let lo = self.candles.partition_point(|c| c.timestamp < from);
        let hi = self.candles.partition_point(|c| c.timestamp <= to);
        &self.candles[lo..hi.max(lo)]
    }

    pub fn candle_at(&self, ts: Timestamp) -> Option<&Candle<S>> {
        self.candles
            .binary_search_by_key(&ts, |c| c.timestamp)
            .ok()
            .map(|i| &self.candles[i])
    }
}

/// Detected accumulation interval; either both bounds exist or neither does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct AccumulationSpan {
    bounds: Option<(Timestamp, Timestamp)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpanError {
    #[error("accum_start {start} is after accum_end {end}")]
    Inverted { start: Timestamp, end: Timestamp },
    #[error("accum_end {end} is not before the target date {target}")]
    NotPrePump { end: Timestamp, target: Timestamp },
}

impl AccumulationSpan {
    pub const ABSENT: AccumulationSpan = AccumulationSpan { bounds: None };

    pub fn new(start: Timestamp, end: Timestamp, target_date: Timestamp) -> Result<Self, SpanError> {
        if start > end {
            return Err(SpanError::Inverted { start, end });
        }
        if end >= target_date {
            return Err(SpanError::NotPrePump { end, target: target_date });
        }
        Ok(AccumulationSpan { bounds: Some((start, end)) })
    }

    pub fn is_present(&self) -> bool {
        self.bounds.is_some()
    }

    pub fn accum_start(&self) -> Option<Timestamp> {
        self.bounds.map(|b| b.0)
    }

    pub fn accum_end(&self) -> Option<Timestamp> {
        self.bounds.map(|b| b.1)
    }

    pub fn bounds(&self) -> Option<(Timestamp, Timestamp)> {
        self.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    fn candle(o: f64, h: f64, l: f64, c: f64, q: f64) -> Candle<f64> {
        Candle::new(ts("2024-12-01T14:00:00Z"), o, h, l, c, q)
    }

    #[test]
    fn valid_candle() {
        assert_eq!(validate_candle(&candle(1.0, 2.0, 0.5, 1.5, 10.0)), Ok(()));
    }

    #[test]
    fn high_below_open_rejected() {
        assert_eq!(validate_candle(&candle(1.0, 0.9, 0.5, 0.8, 10.0)), Err(CandleRule::HighBelowBody));
    }

    #[test]
    fn negative_quantity_rejected() {
        assert_eq!(validate_candle(&candle(1.0, 2.0, 0.5, 1.5, -1.0)), Err(CandleRule::NegativeQuantity));
    }

    #[test]
    fn other_rules() {
        assert_eq!(validate_candle(&candle(1.0, 1.0, 2.0, 1.0, 0.0)), Err(CandleRule::LowAboveHigh));
        assert_eq!(validate_candle(&candle(1.0, 2.0, 1.2, 1.5, 0.0)), Err(CandleRule::LowAboveBody));
        assert_eq!(validate_candle(&candle(0.0, 2.0, 0.5, 1.5, 0.0)), Err(CandleRule::NonPositivePrice));
        assert_eq!(validate_candle(&candle(f64::NAN, 2.0, 0.5, 1.5, 0.0)), Err(CandleRule::NonFinite));
        let mut c = candle(1.0, 2.0, 0.5, 1.5, 1.0);
        c.timestamp = Timestamp::from_millis(c.timestamp.as_millis() + 1);
        assert_eq!(validate_candle(&c), Err(CandleRule::NotMinuteAligned));
        // decimal noise within tolerance passes
        assert_eq!(validate_candle(&candle(1.0, 1.0 - 1e-13, 0.5, 0.9, 0.0)), Ok(()));
        assert_eq!(validate_candle(&Candle::new(c.timestamp.truncate_to_minute(), 1.0f32, 2.0, 0.5, 1.5, 3.0)), Ok(()));
    }

    #[test]
    fn timestamp_parsing() {
        assert_eq!(ts("2024-12-01T14:00:00Z").as_millis(), 1_733_061_600_000);
        assert_eq!(ts("1733061600000"), ts("2024-12-01T14:00:00Z"));
        assert_eq!(ts("2024-12-01T15:00:00+01:00"), ts("2024-12-01T14:00:00Z"));
        assert_eq!(ts("2024-12-01 14:00"), ts("2024-12-01T14:00:00Z"));
        assert_eq!(ts("2024-12-01T14:00:37Z").truncate_to_minute(), ts("2024-12-01T14:00:00Z"));
        assert!(Timestamp::parse("yesterday").is_err());
        assert_eq!(ts("2024-12-01T14:00:00Z").to_string(), "2024-12-01T14:00:00Z");
        assert_eq!(ts("2024-12-01T14:00:00Z").compact(), "20241201T1400Z");
    }

    #[test]
    fn window_bounds_and_ordering() {
        let key = EventKey::new("BTC_X", ts("2024-12-01T14:00:00Z")).unwrap();
        let t = key.target_date;
        assert!(key.window_contains(t.plus_minutes(-5760)));
        assert!(key.window_contains(t.plus_minutes(2880)));
        assert!(!key.window_contains(t.plus_minutes(2881)));
        assert!(!key.window_contains(t.plus_minutes(-5761)));

        let c = |m: i64| Candle::flat(t.plus_minutes(m), 1.0, 1.0);
        assert!(EventWindow::new(key.clone(), vec![c(-2), c(-1), c(0)]).is_ok());
        assert_eq!(EventWindow::new(key.clone(), vec![c(-1), c(-1)]), Err(WindowError::Unsorted(1)));
        assert!(matches!(EventWindow::new(key.clone(), vec![c(2881)]), Err(WindowError::OutOfWindow(_))));

        let w = EventWindow::new(key, vec![c(-3), c(-1), c(0), c(5)]).unwrap();
        assert_eq!(w.pre_pump().len(), 2);
        assert_eq!(w.post_target().len(), 2);
        assert_eq!(w.range(t.plus_minutes(-1), t).len(), 2);
        assert!(w.candle_at(t.plus_minutes(-2)).is_none());
    }

    #[test]
    fn key_and_span_invariants() {
        assert_eq!(EventKey::new("", Timestamp::from_millis(0)), Err(EventKeyError::EmptySymbol));
        assert!(EventKey::new("A_B", Timestamp::from_millis(1)).is_err());
        assert_eq!(EventKey::new("BTC_USDT", Timestamp::from_millis(0)).unwrap().quote_currency(), Some("USDT"));
        let t = ts("2024-12-01T14:00:00Z");
        assert!(AccumulationSpan::new(t.plus_minutes(-5), t.plus_minutes(-1), t).is_ok());
        assert!(AccumulationSpan::new(t.plus_minutes(-1), t.plus_minutes(-5), t).is_err());
        assert!(AccumulationSpan::new(t.plus_minutes(-1), t, t).is_err());
        assert!(!AccumulationSpan::ABSENT.is_present());
    }
}
