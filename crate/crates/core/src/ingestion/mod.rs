//! Getting candles into memory: CSV files, the exchange candle endpoint, and
//! slicing per-event analysis windows.

mod files;
mod http;

use std::path::PathBuf;

use thiserror::Error;

use crate::model::{Candle, CandleRule, EventKey, EventWindow, Timestamp};
use crate::scalar::Scalar;

pub use files::{
    candle_file_name, load_candles_csv, load_manifest, read_candles_csv, read_manifest, write_candles_csv,
    write_manifest, CANDLE_HEADER, MANIFEST_HEADER,
};
pub use http::{
    fetch_candles, CandleSchema, CandleSource, FetchError, PoloniexSchema, RateLimiter, RawCandle, SourceConfig,
    BASE_URL_ENV,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {rule}")]
    Invalid { line: u64, rule: CandleRule },
    #[error("duplicate candle timestamp {ts} (lines {first_line} and {second_line})")]
    DuplicateTimestamp { ts: Timestamp, first_line: u64, second_line: u64 },
    #[error("duplicate manifest entries: {}", .0.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", "))]
    DuplicateKeys(Vec<EventKey>),
}

/// Flagged events to analyse; `{symbol, target_date}` pairs are unique.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventManifest {
    entries: Vec<EventKey>,
}

impl EventManifest {
    pub fn new(entries: Vec<EventKey>) -> Result<Self, IngestError> {
        let mut sorted: Vec<&EventKey> = entries.iter().collect();
        sorted.sort();
        let mut dups: Vec<EventKey> = sorted.windows(2).filter(|p| p[0] == p[1]).map(|p| p[0].clone()).collect();
        dups.dedup();
        if !dups.is_empty() {
            return Err(IngestError::DuplicateKeys(dups));
        }
        Ok(EventManifest { entries })
    }

    pub fn entries(&self) -> &[EventKey] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Candles with timestamp in `[target − 5760 min, target + 2880 min]`, both
/// ends inclusive. `candles` must already be sorted and validated.
pub fn slice_window<S: Scalar>(candles: &[Candle<S>], key: &EventKey) -> EventWindow<S> {
    let lo = candles.partition_point(|c| c.timestamp < key.window_start());
    let hi = candles.partition_point(|c| c.timestamp <= key.window_end());
    EventWindow::new_unchecked(key.clone(), candles[lo..hi.max(lo)].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> EventKey {
        EventKey::new("BTC_X", Timestamp::parse("2024-12-01T14:00:00Z").unwrap()).unwrap()
    }

    #[test]
    fn window_boundaries_inclusive() {
        let k = key();
        let at = |m| Candle::flat(k.target_date.plus_minutes(m), 1.0, 1.0);
        let candles = vec![at(-5761), at(-5760), at(0), at(2880), at(2881)];
        let w = slice_window(&candles, &k);
        let offsets: Vec<i64> = w.candles().iter().map(|c| k.target_date.minutes_until(c.timestamp)).collect();
        assert_eq!(offsets, vec![-5760, 0, 2880]);
        assert!(slice_window::<f64>(&[], &k).candles().is_empty());
    }

    #[test]
    fn manifest_rejects_duplicates() {
        let e = EventManifest::new(vec![key(), key()]).unwrap_err();
        assert!(e.to_string().contains("BTC_X@2024-12-01T14:00:00Z"), "{e}");
        assert_eq!(EventManifest::new(vec![key()]).unwrap().len(), 1);
    }
}
