use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use crate::model::{validate_candle, Candle, EventKey, Timestamp};
use crate::scalar::{format_sig12, Scalar};

use super::{EventManifest, IngestError};

pub const CANDLE_HEADER: &str = "timestamp,open,high,low,close,quantity";
pub const MANIFEST_HEADER: &str = "symbol,target_date";

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 16, f))
        .map_err(|source| IngestError::Io { path: path.to_owned(), source })
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    IngestError::Parse { line, message: e.to_string() }
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &str) -> Result<(), IngestError> {
    let found = reader.byte_headers().map_err(csv_error)?;
    let found: Vec<String> = found.iter().map(|f| String::from_utf8_lossy(f).trim().to_owned()).collect();
    if found.join(",") != expected {
        return Err(IngestError::Parse {
            line: 1,
            message: format!("expected header `{expected}`, found `{}`", found.join(",")),
        });
    }
    Ok(())
}

fn field(rec: &csv::ByteRecord, i: usize, line: u64) -> Result<&str, IngestError> {
    let raw = rec.get(i).ok_or_else(|| IngestError::Parse { line, message: format!("missing column {}", i + 1) })?;
    std::str::from_utf8(raw)
        .map(str::trim)
        .map_err(|_| IngestError::Parse { line, message: "invalid UTF-8".into() })
}

fn number<S: Scalar>(rec: &csv::ByteRecord, i: usize, line: u64, name: &str) -> Result<S, IngestError> {
    let s = field(rec, i, line)?;
    s.parse()
        .map_err(|_| IngestError::Parse { line, message: format!("invalid {name} `{s}`") })
}

/// Reads `symbol,target_date` rows; target dates are truncated to the minute.
pub fn read_manifest(input: impl Read) -> Result<EventManifest, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    check_header(&mut reader, MANIFEST_HEADER)?;
    let mut entries = Vec::new();
    let mut rec = csv::ByteRecord::new();
    while reader.read_byte_record(&mut rec).map_err(csv_error)? {
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let symbol = field(&rec, 0, line)?;
        let ts = Timestamp::parse(field(&rec, 1, line)?)
            .map_err(|e| IngestError::Parse { line, message: e.to_string() })?;
        let key = EventKey::new(symbol, ts.truncate_to_minute())
            .map_err(|e| IngestError::Parse { line, message: e.to_string() })?;
        entries.push(key);
    }
    EventManifest::new(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<EventManifest, IngestError> {
    read_manifest(open(path.as_ref())?)
}

pub fn write_manifest(mut out: impl Write, manifest: &EventManifest) -> io::Result<()> {
    writeln!(out, "{MANIFEST_HEADER}")?;
    for k in manifest.entries() {
        writeln!(out, "{},{}", k.symbol, k.target_date)?;
    }
    Ok(())
}

/// Parses a candle CSV, validates every row and returns the candles sorted
/// ascending. Duplicate timestamps are rejected.
pub fn read_candles_csv<S: Scalar>(input: impl Read) -> Result<Vec<Candle<S>>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    check_header(&mut reader, CANDLE_HEADER)?;
    let mut rows: Vec<(Candle<S>, u64)> = Vec::new();
    let mut rec = csv::ByteRecord::new();
    while reader.read_byte_record(&mut rec).map_err(csv_error)? {
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let ts_field = field(&rec, 0, line)?;
        let timestamp = Timestamp::parse(ts_field)
            .map_err(|e| IngestError::Parse { line, message: e.to_string() })?;
        let candle = Candle {
            timestamp,
            open: number(&rec, 1, line, "open")?,
            high: number(&rec, 2, line, "high")?,
            low: number(&rec, 3, line, "low")?,
            close: number(&rec, 4, line, "close")?,
            quantity: number(&rec, 5, line, "quantity")?,
        };
        validate_candle(&candle).map_err(|rule| IngestError::Invalid { line, rule })?;
        rows.push((candle, line));
    }
    if !rows.windows(2).all(|p| p[0].0.timestamp <= p[1].0.timestamp) {
        rows.sort_by_key(|r| r.0.timestamp);
    }
    if let Some(p) = rows.windows(2).find(|p| p[0].0.timestamp == p[1].0.timestamp) {
        let (a, b) = (p[0].1.min(p[1].1), p[0].1.max(p[1].1));
        return Err(IngestError::DuplicateTimestamp { ts: p[0].0.timestamp, first_line: a, second_line: b });
    }
    Ok(rows.into_iter().map(|r| r.0).collect())
}

pub fn load_candles_csv<S: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Candle<S>>, IngestError> {
    read_candles_csv(open(path.as_ref())?)
}

/// Writes candles with epoch-millisecond timestamps and 12-significant-digit
/// decimals.
pub fn write_candles_csv<S: Scalar>(mut out: impl Write, candles: &[Candle<S>]) -> io::Result<()> {
    writeln!(out, "{CANDLE_HEADER}")?;
    for c in candles {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            c.timestamp.as_millis(),
            format_sig12(c.open),
            format_sig12(c.high),
            format_sig12(c.low),
            format_sig12(c.close),
            format_sig12(c.quantity)
        )?;
    }
    Ok(())
}

/// Per-event candle file name, e.g. `BTC_USDT__20241201T1400Z.csv`.
/// Characters outside `[A-Za-z0-9_.-]` in the symbol become `-`.
pub fn candle_file_name(key: &EventKey) -> String {
    let symbol: String = key
        .symbol
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-') { c } else { '-' })
        .collect();
    format!("{}__{}.csv", symbol, key.target_date.compact())
}
