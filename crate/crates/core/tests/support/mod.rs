#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use pumpscope_core::model::{Candle, EventKey, EventWindow, Timestamp, WINDOW_BEFORE_MINUTES};
use pumpscope_core::synth::{SynthArchetype, SynthConfig, SynthRng};

/// Walks every minute before the target and keeps the first and last one
/// that traded, looking quantities up by minute.
pub fn oracle_span(w: &EventWindow<f64>) -> Option<(Timestamp, Timestamp)> {
    let by_minute: HashMap<i64, f64> = w.candles().iter().map(|c| (c.timestamp.as_millis(), c.quantity)).collect();
    let t = w.target_date();
    let mut first = None;
    let mut last = None;
    for m in (1..=WINDOW_BEFORE_MINUTES).rev() {
        let ts = t.plus_minutes(-m);
        if by_minute.get(&ts.as_millis()).is_some_and(|&q| q > 0.0) {
            first.get_or_insert(ts);
            last = Some(ts);
        }
    }
    first.zip(last)
}

pub fn key(i: usize) -> EventKey {
    EventKey::new(format!("T{i:05}_USDT"), Timestamp::from_millis(1_700_000_040_000 + i as i64 * 60_000)).unwrap()
}

/// A valid generator config for `archetype`, drawn from `rng`.
pub fn random_config(rng: &mut SynthRng, archetype: SynthArchetype, sparsity: f64) -> SynthConfig<f64> {
    let seed = rng.next_u64();
    let base_price = 10f64.powf(-4.0 + 5.0 * rng.unit());
    let pump_multiplier = 1.5 + 20.0 * rng.unit();
    let insider_volume_total = 10f64.powf(2.0 + 5.0 * rng.unit());
    let mut cfg = match archetype {
        SynthArchetype::DormantControl => SynthConfig::dormant(seed, base_price),
        SynthArchetype::PreAccumulated => {
            let span = rng.between(61, 5699) as u32;
            let spikes = rng.between(2, 2 + u64::from(span - 60).min(12)) as u32;
            SynthConfig {
                archetype,
                seed,
                base_price,
                pump_multiplier,
                accumulation_span_minutes: span,
                spike_count: spikes,
                insider_volume_total,
                last_hour_volume_fraction: 0.05 + 0.9 * rng.unit(),
                sparsity: 0.0,
            }
        }
        SynthArchetype::OnTheSpot => {
            let span = rng.between(0, 59) as u32;
            let spikes = rng.between(0, u64::from(span + 1).min(6)) as u32;
            SynthConfig {
                archetype,
                seed,
                base_price,
                pump_multiplier,
                accumulation_span_minutes: span,
                spike_count: spikes,
                insider_volume_total,
                last_hour_volume_fraction: 1.0,
                sparsity: 0.0,
            }
        }
    };
    cfg.sparsity = sparsity;
    cfg
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Failure modes a [`Stub`] injects.
#[derive(Clone, Copy, Debug, Default)]
pub struct Faults {
    /// Answer every n-th request with 429.
    pub too_many_every: Option<usize>,
    /// Answer every n-th request with 503.
    pub unavailable_every: Option<usize>,
    /// Cap each page at `min(limit, cap)` candles, with `cap` varying per
    /// request between `lo` and `hi`.
    pub truncate: Option<(usize, usize)>,
    /// Return each page in scrambled order.
    pub scramble: bool,
}

/// A local HTTP server speaking the Poloniex candle format.
pub struct Stub {
    pub base_url: String,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
    arrivals: Arc<Mutex<Vec<Instant>>>,
    served: Arc<AtomicUsize>,
}

fn record(c: &Candle<f64>) -> String {
    let s = |x: f64| format!("\"{x}\"");
    format!(
        "[{},{},{},{},\"0\",{},\"0\",\"0\",1,{},{},\"MINUTE_1\",{},{}]",
        s(c.low),
        s(c.high),
        s(c.open),
        s(c.close),
        s(c.quantity),
        c.timestamp.as_millis(),
        s(c.close),
        c.timestamp.as_millis(),
        c.timestamp.as_millis() + 59_999
    )
}

fn query(url: &str, name: &str) -> Option<i64> {
    let q = url.split_once('?')?.1;
    q.split('&').find_map(|kv| kv.strip_prefix(name)?.strip_prefix('=')?.parse().ok())
}

fn answer(data: &HashMap<String, Vec<Candle<f64>>>, faults: Faults, n: usize, url: &str) -> (u16, String) {
    if faults.too_many_every.is_some_and(|k| n.is_multiple_of(k)) {
        return (429, "{\"code\":429,\"message\":\"slow down\"}".into());
    }
    if faults.unavailable_every.is_some_and(|k| n.is_multiple_of(k)) {
        return (503, "unavailable".into());
    }
    let Some(symbol) = url.strip_prefix("/markets/").and_then(|r| r.split('/').next()) else {
        return (404, "not found".into());
    };
    let (Some(start), Some(end), Some(limit)) = (query(url, "startTime"), query(url, "endTime"), query(url, "limit"))
    else {
        return (400, "bad query".into());
    };
    let mut cap = limit as usize;
    if let Some((lo, hi)) = faults.truncate {
        cap = cap.min(lo + (n * 7919) % (hi - lo + 1));
    }
    let mut page: Vec<&Candle<f64>> = data
        .get(symbol)
        .map(|cs| cs.iter().filter(|c| (start..=end).contains(&c.timestamp.as_millis())).take(cap).collect())
        .unwrap_or_default();
    if faults.scramble && page.len() > 2 {
        let mid = page.len() / 2;
        page.rotate_left(mid);
        page[..mid].reverse();
        page.swap(0, mid);
    }
    (200, format!("[{}]", page.into_iter().map(record).collect::<Vec<_>>().join(",")))
}

impl Stub {
    pub fn start(data: HashMap<String, Vec<Candle<f64>>>, faults: Faults) -> Stub {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind stub"));
        let base_url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let arrivals = Arc::new(Mutex::new(Vec::new()));
        let served = Arc::new(AtomicUsize::new(0));
        let handle = {
            let server = Arc::clone(&server);
            let arrivals = Arc::clone(&arrivals);
            let served = Arc::clone(&served);
            std::thread::spawn(move || {
                for req in server.incoming_requests() {
                    let n = {
                        let mut a = arrivals.lock().unwrap();
                        a.push(Instant::now());
                        a.len()
                    };
                    let (status, body) = answer(&data, faults, n, req.url());
                    if status == 200 {
                        served.fetch_add(1, Ordering::SeqCst);
                    }
                    let _ = req.respond(tiny_http::Response::from_string(body).with_status_code(status));
                }
            })
        };
        Stub { base_url, server, handle: Some(handle), arrivals, served }
    }

    pub fn requests(&self) -> usize {
        self.arrivals.lock().unwrap().len()
    }

    pub fn successful_pages(&self) -> usize {
        self.served.load(Ordering::SeqCst)
    }

    /// Largest number of requests that arrived within any 1-second window.
    pub fn max_requests_per_second(&self) -> usize {
        let a = self.arrivals.lock().unwrap();
        let mut best = 0;
        let mut lo = 0;
        for hi in 0..a.len() {
            while a[hi].duration_since(a[lo]) >= Duration::from_secs(1) {
                lo += 1;
            }
            best = best.max(hi - lo + 1);
        }
        best
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// A sparse, irregular candle series over `[from, to)`.
pub fn market_series(rng: &mut SynthRng, from: Timestamp, to: Timestamp) -> Vec<Candle<f64>> {
    let mut out = Vec::new();
    let mut price = 1.0 + rng.unit();
    let mut t = from;
    while t < to {
        if rng.unit() < 0.8 {
            let open = price;
            price *= 1.0 + (rng.unit() - 0.5) * 0.01;
            let close = price;
            let high = open.max(close) * (1.0 + 0.002 * rng.unit());
            let low = open.min(close) * (1.0 - 0.002 * rng.unit());
            let qty = if rng.unit() < 0.3 { 0.0 } else { (rng.unit() * 1e4).round() / 100.0 };
            out.push(Candle { timestamp: t, open, high, low, close, quantity: qty });
        }
        t = t.plus_minutes(1);
    }
    out
}
