//! Blocking client for an exchange-style minute-candle REST endpoint.
//!
//! `GET {base_url}/markets/{symbol}/candles?interval=MINUTE_1&startTime=..&endTime=..&limit=..`
//!
//! Requests are paced by a shared [`RateLimiter`]; 429, 5xx and transport
//! failures are retried with exponential backoff. Pages may come back short
//! or unordered: the client keeps requesting from just past the newest
//! candle received until a page comes back empty or the range is covered.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;
use thiserror::Error;
use tracing::{debug, warn};

use crate::model::{validate_candle, Candle, Timestamp};
use crate::scalar::Scalar;

pub const BASE_URL_ENV: &str = "PUMPSCOPE_BASE_URL";
const MAX_RETRY_LIMIT: u32 = 10;
const BODY_EXCERPT_CHARS: usize = 200;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("invalid source config: {0}")]
    InvalidConfig(String),
    #[error("invalid range: start {start} is not before end {end}")]
    InvalidRange { start: Timestamp, end: Timestamp },
    #[error("network error after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed payload: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceConfig {
    pub base_url: String,
    pub requests_per_second: f64,
    pub max_candles_per_request: u32,
    pub retry_limit: u32,
    pub timeout: Duration,
    /// Delay before the first retry; doubles on every further attempt.
    pub retry_backoff: Duration,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            base_url: "https://api.poloniex.com".into(),
            requests_per_second: 5.0,
            max_candles_per_request: 500,
            retry_limit: 5,
            timeout: Duration::from_secs(30),
            retry_backoff: Duration::from_millis(250),
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), FetchError> {
        if !(self.requests_per_second.is_finite() && self.requests_per_second > 0.0) {
            return Err(FetchError::InvalidConfig("requests_per_second must be > 0".into()));
        }
        if self.max_candles_per_request == 0 {
            return Err(FetchError::InvalidConfig("max_candles_per_request must be > 0".into()));
        }
        if self.retry_limit > MAX_RETRY_LIMIT {
            return Err(FetchError::InvalidConfig(format!("retry_limit must be <= {MAX_RETRY_LIMIT}")));
        }
        if self.base_url.is_empty() {
            return Err(FetchError::InvalidConfig("base_url is empty".into()));
        }
        Ok(())
    }

    /// Replaces `base_url` with `$PUMPSCOPE_BASE_URL` when that is set.
    pub fn with_env_override(self) -> Self {
        self.with_base_url_override(std::env::var(BASE_URL_ENV).ok())
    }

    pub fn with_base_url_override(mut self, url: Option<String>) -> Self {
        if let Some(url) = url.filter(|u| !u.trim().is_empty()) {
            self.base_url = url;
        }
        self
    }
}

/// Spaces request starts at least `1 / rate` apart, so no 1-second window
/// ever holds more than `ceil(rate)` requests. Safe to share across threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        // small margin so network jitter cannot squeeze arrivals together
        let interval = Duration::from_secs_f64(1.0 / requests_per_second) + Duration::from_millis(2);
        RateLimiter { interval, next_slot: Mutex::new(None) }
    }

    /// Blocks until the caller may issue one request.
    pub fn acquire(&self) {
        let (slot, now) = {
            let mut next = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            (slot, now)
        };
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

/// One candle as delivered by an exchange, numbers still in text form.
#[derive(Clone, Debug, PartialEq)]
pub struct RawCandle {
    pub timestamp: Timestamp,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub quantity: String,
}

/// Maps one exchange's URL layout and payload onto candles.
pub trait CandleSchema: Send + Sync {
    fn request_url(&self, base_url: &str, symbol: &str, start: Timestamp, end_inclusive: Timestamp, limit: u32) -> String;
    fn parse_page(&self, body: &str) -> Result<Vec<RawCandle>, FetchError>;
}

/// Poloniex v3 `MINUTE_1` candles: each record is an array
/// `[low, high, open, close, amount, quantity, buyTakerAmount,
/// buyTakerQuantity, tradeCount, ts, weightedAverage, interval, startTime,
/// closeTime]`. `quantity` (index 5) is base-asset volume and `startTime`
/// (index 12) the minute the candle opens.
#[derive(Clone, Copy, Debug, Default)]
pub struct PoloniexSchema;

impl PoloniexSchema {
    const LOW: usize = 0;
    const HIGH: usize = 1;
    const OPEN: usize = 2;
    const CLOSE: usize = 3;
    const QUANTITY: usize = 5;
    const START_TIME: usize = 12;
}

fn text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

impl CandleSchema for PoloniexSchema {
    fn request_url(&self, base_url: &str, symbol: &str, start: Timestamp, end_inclusive: Timestamp, limit: u32) -> String {
        format!(
            "{}/markets/{}/candles?interval=MINUTE_1&startTime={}&endTime={}&limit={}",
            base_url.trim_end_matches('/'),
            symbol,
            start.as_millis(),
            end_inclusive.as_millis(),
            limit
        )
    }

    fn parse_page(&self, body: &str) -> Result<Vec<RawCandle>, FetchError> {
        let rows: Vec<Vec<Value>> =
            serde_json::from_str(body).map_err(|e| FetchError::Malformed(e.to_string()))?;
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                let get = |idx: usize| {
                    row.get(idx)
                        .and_then(text)
                        .ok_or_else(|| FetchError::Malformed(format!("record {i}: missing field {idx}")))
                };
                let start = get(Self::START_TIME)?;
                let ms: i64 = start
                    .parse()
                    .map_err(|_| FetchError::Malformed(format!("record {i}: bad startTime `{start}`")))?;
                Ok(RawCandle {
                    timestamp: Timestamp::from_millis(ms),
                    open: get(Self::OPEN)?,
                    high: get(Self::HIGH)?,
                    low: get(Self::LOW)?,
                    close: get(Self::CLOSE)?,
                    quantity: get(Self::QUANTITY)?,
                })
            })
            .collect()
    }
}

fn to_candle<S: Scalar>(raw: &RawCandle) -> Result<Candle<S>, FetchError> {
    let num = |s: &str, name: &str| {
        s.parse::<S>()
            .map_err(|_| FetchError::Malformed(format!("candle {}: bad {name} `{s}`", raw.timestamp)))
    };
    let c = Candle {
        timestamp: raw.timestamp,
        open: num(&raw.open, "open")?,
        high: num(&raw.high, "high")?,
        low: num(&raw.low, "low")?,
        close: num(&raw.close, "close")?,
        quantity: num(&raw.quantity, "quantity")?,
    };
    validate_candle(&c).map_err(|rule| FetchError::Malformed(format!("candle {}: {rule}", raw.timestamp)))?;
    Ok(c)
}

fn excerpt(body: &str) -> String {
    body.chars().take(BODY_EXCERPT_CHARS).collect()
}

/// A configured endpoint. Clones share the rate limiter.
#[derive(Clone)]
pub struct CandleSource {
    cfg: SourceConfig,
    agent: ureq::Agent,
    limiter: Arc<RateLimiter>,
    schema: Arc<dyn CandleSchema>,
}

impl CandleSource {
    pub fn new(cfg: SourceConfig) -> Result<Self, FetchError> {
        Self::with_schema(cfg, Arc::new(PoloniexSchema))
    }

    pub fn with_schema(cfg: SourceConfig, schema: Arc<dyn CandleSchema>) -> Result<Self, FetchError> {
        cfg.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
        let limiter = Arc::new(RateLimiter::new(cfg.requests_per_second));
        Ok(CandleSource { cfg, agent, limiter, schema })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.cfg
    }

    fn get(&self, url: &str) -> Result<String, FetchError> {
        let attempts = self.cfg.retry_limit + 1;
        let mut last: FetchError = FetchError::Network { attempts: 0, message: "no attempt made".into() };
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.cfg.retry_backoff * 2u32.saturating_pow(attempt - 1);
                debug!(%url, attempt, ?backoff, "retrying");
                thread::sleep(backoff);
            }
            self.limiter.acquire();
            match self.agent.get(url).call() {
                Ok(resp) => {
                    return resp
                        .into_string()
                        .map_err(|e| FetchError::Network { attempts: attempt + 1, message: e.to_string() })
                }
                Err(ureq::Error::Status(status, resp)) => {
                    let body = excerpt(&resp.into_string().unwrap_or_default());
                    let err = FetchError::HttpStatus { status, body };
                    if status == 429 || status >= 500 {
                        warn!(%url, status, "transient HTTP status");
                        last = err;
                    } else {
                        return Err(err);
                    }
                }
                Err(ureq::Error::Transport(t)) => {
                    warn!(%url, error = %t, "transport error");
                    last = FetchError::Network { attempts: attempt + 1, message: t.to_string() };
                }
            }
        }
        Err(match last {
            FetchError::Network { message, .. } => FetchError::Network { attempts, message },
            other => other,
        })
    }

    /// All minute candles in `[start, end)`, sorted, validated and
    /// de-duplicated by timestamp.
    pub fn fetch_candles<S: Scalar>(&self, symbol: &str, start: Timestamp, end: Timestamp) -> Result<Vec<Candle<S>>, FetchError> {
        if start >= end {
            return Err(FetchError::InvalidRange { start, end });
        }
        let mut collected: BTreeMap<Timestamp, Candle<S>> = BTreeMap::new();
        let mut cursor = start;
        while cursor < end {
            let url = self.schema.request_url(
                &self.cfg.base_url,
                symbol,
                cursor,
                Timestamp::from_millis(end.as_millis() - 1),
                self.cfg.max_candles_per_request,
            );
            let page = self.schema.parse_page(&self.get(&url)?)?;
            let mut newest: Option<Timestamp> = None;
            for raw in &page {
                let candle = to_candle::<S>(raw)?;
                if candle.timestamp < cursor || candle.timestamp >= end {
                    continue;
                }
                newest = newest.max(Some(candle.timestamp));
                collected.entry(candle.timestamp).or_insert(candle);
            }
            match newest {
                Some(t) => cursor = t.plus_minutes(1),
                None => break,
            }
        }
        Ok(collected.into_values().collect())
    }
}

/// One-shot fetch with a fresh [`CandleSource`].
pub fn fetch_candles<S: Scalar>(cfg: &SourceConfig, symbol: &str, start: Timestamp, end: Timestamp) -> Result<Vec<Candle<S>>, FetchError> {
    CandleSource::new(cfg.clone())?.fetch_candles(symbol, start, end)
}
