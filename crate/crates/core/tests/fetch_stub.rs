mod support;

use std::collections::HashMap;
use std::time::Duration;

use pumpscope_core::ingestion::{CandleSource, FetchError, SourceConfig};
use pumpscope_core::model::{Candle, Timestamp};
use pumpscope_core::synth::SynthRng;
use support::{market_series, Faults, Stub};

fn config(base_url: &str, rps: f64) -> SourceConfig {
    SourceConfig {
        base_url: base_url.to_owned(),
        requests_per_second: rps,
        max_candles_per_request: 200,
        retry_limit: 4,
        timeout: Duration::from_secs(5),
        retry_backoff: Duration::from_millis(5),
    }
}

fn dataset(seed: u64, from: Timestamp, to: Timestamp) -> Vec<Candle<f64>> {
    market_series(&mut SynthRng::new(seed), from, to)
}

#[test]
fn hostile_server_still_yields_complete_range() {
    let from = Timestamp::from_millis(1_700_000_040_000);
    let to = from.plus_minutes(3000);
    let data = dataset(1, from.plus_minutes(-100), to.plus_minutes(100));
    let stub = Stub::start(
        HashMap::from([("AAA_USDT".to_owned(), data.clone())]),
        Faults { too_many_every: Some(4), unavailable_every: Some(11), truncate: Some((37, 150)), scramble: true },
    );
    let source = CandleSource::new(config(&stub.base_url, 40.0)).unwrap();
    let got: Vec<Candle<f64>> = source.fetch_candles("AAA_USDT", from, to).unwrap();
    let expected: Vec<_> = data.into_iter().filter(|c| c.timestamp >= from && c.timestamp < to).collect();
    assert_eq!(got, expected);
    assert!(stub.max_requests_per_second() <= 40, "{}", stub.max_requests_per_second());
}

#[test]
fn rate_limit_holds_over_every_second() {
    let from = Timestamp::from_millis(1_700_000_040_000);
    let to = from.plus_minutes(2400);
    let stub = Stub::start(
        HashMap::from([("BBB_USDT".to_owned(), dataset(2, from, to))]),
        Faults { truncate: Some((20, 20)), ..Faults::default() },
    );
    let source = CandleSource::new(config(&stub.base_url, 8.0)).unwrap();
    source.fetch_candles::<f64>("BBB_USDT", from, to).unwrap();
    assert!(stub.requests() > 16);
    assert!(stub.max_requests_per_second() <= 8, "{}", stub.max_requests_per_second());
}

#[test]
fn empty_market_is_one_request() {
    let stub = Stub::start(HashMap::new(), Faults::default());
    let from = Timestamp::from_millis(1_700_000_040_000);
    let got = CandleSource::new(config(&stub.base_url, 50.0))
        .unwrap()
        .fetch_candles::<f64>("NONE_USDT", from, from.plus_minutes(500))
        .unwrap();
    assert!(got.is_empty());
    assert_eq!(stub.requests(), 1);
}

#[test]
fn persistent_throttling_exhausts_retries() {
    let stub = Stub::start(HashMap::new(), Faults { too_many_every: Some(1), ..Faults::default() });
    let mut cfg = config(&stub.base_url, 100.0);
    cfg.retry_limit = 2;
    let from = Timestamp::from_millis(1_700_000_040_000);
    let err = CandleSource::new(cfg).unwrap().fetch_candles::<f64>("X_USDT", from, from.plus_minutes(5)).unwrap_err();
    assert!(matches!(err, FetchError::HttpStatus { status: 429, .. }), "{err}");
    assert_eq!(stub.requests(), 3);
}

#[test]
fn unreachable_host_is_network_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let mut cfg = config(&format!("http://{addr}"), 100.0);
    cfg.retry_limit = 1;
    let from = Timestamp::from_millis(1_700_000_040_000);
    let err = CandleSource::new(cfg).unwrap().fetch_candles::<f64>("X_USDT", from, from.plus_minutes(5)).unwrap_err();
    assert!(matches!(err, FetchError::Network { attempts: 2, .. }), "{err}");
}
