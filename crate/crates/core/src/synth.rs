//! Seeded synthetic pump-and-dump events with known ground truth.
//!
//! # Randomness
//!
//! All draws come from SplitMix64 (`state += 0x9E3779B97F4A7C15`, then the
//! standard 30/27/31 xor-shift-multiply finaliser), seeded per event with
//! `seed ^ fnv1a64(symbol ‖ target_ms as little-endian i64)`. Derived draws:
//!
//! - `unit()`: `(next_u64() >> 11) · 2⁻⁵³`, uniform in `[0, 1)`
//! - `below(n)`: `(next_u64() · n) >> 64` (128-bit product), in `[0, n)`
//!
//! so a corpus can be regenerated bit-for-bit by any implementation that
//! follows the same draw order.
//!
//! # Event shape
//!
//! Pre-pump minutes are flat, zero-volume candles except for the configured
//! spikes; each spike ticks the price up slightly. From the target minute the
//! price climbs linearly to `base_price · pump_multiplier` within five
//! minutes, falls back linearly, and is flat again within thirty minutes.
//! Sparsity drops flat filler minutes only; spikes, pump candles and the
//! target minute are always emitted. Every price and quantity is rounded
//! to 12 significant digits so the CSV round trip is exact.

use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::ingestion::{EventManifest, IngestError};
use crate::model::{Candle, EventKey, EventWindow, Timestamp, WINDOW_AFTER_MINUTES, WINDOW_BEFORE_MINUTES};
use crate::scalar::{round_sig12, Scalar};

pub const GROUND_TRUTH_HEADER: &str = "symbol,target_date,true_accum_start,true_accum_end,true_total_volume,true_peak_high,true_entry_price,true_concentration_60";

const MAX_PUMP_RAMP_MINUTES: u64 = 5;
const MAX_REVERT_MINUTES: u64 = 30;
const LAST_HOUR: u64 = 60;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("invalid archetype mix: {0}")]
    InvalidMix(String),
}

/// Portable seeded stream; see the module docs for the exact derivations.
#[derive(Clone, Debug)]
pub struct SynthRng(SplitMix64);

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        SynthRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn for_event(seed: u64, key: &EventKey) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let bytes = key.symbol.bytes().chain(key.target_date.as_millis().to_le_bytes());
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        SynthRng::new(seed ^ h)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform in `[lo, hi]`.
    pub fn between(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    /// `k` distinct values from `[lo, hi]` (Floyd's algorithm), ascending.
    fn distinct(&mut self, k: u64, lo: u64, hi: u64) -> Vec<u64> {
        let n = hi + 1 - lo;
        let mut picked: Vec<u64> = Vec::with_capacity(k as usize);
        for j in (n - k)..n {
            let t = self.below(j + 1);
            picked.push(if picked.contains(&t) { j } else { t });
        }
        let mut out: Vec<u64> = picked.into_iter().map(|v| v + lo).collect();
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SynthArchetype {
    PreAccumulated,
    OnTheSpot,
    DormantControl,
}

impl SynthArchetype {
    pub const ALL: [SynthArchetype; 3] =
        [SynthArchetype::PreAccumulated, SynthArchetype::OnTheSpot, SynthArchetype::DormantControl];

    pub fn as_str(self) -> &'static str {
        match self {
            SynthArchetype::PreAccumulated => "pre_accumulated",
            SynthArchetype::OnTheSpot => "on_the_spot",
            SynthArchetype::DormantControl => "dormant_control",
        }
    }
}

impl fmt::Display for SynthArchetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig<S> {
    pub archetype: SynthArchetype,
    pub seed: u64,
    pub base_price: S,
    /// Peak high is `base_price · pump_multiplier`.
    pub pump_multiplier: S,
    /// Minutes between the first and the last spike.
    pub accumulation_span_minutes: u32,
    pub spike_count: u32,
    pub insider_volume_total: S,
    /// Share of insider volume placed on the final spike, inside the last hour.
    pub last_hour_volume_fraction: S,
    /// Probability that a flat filler minute has no candle.
    pub sparsity: f64,
}

impl<S: Scalar> SynthConfig<S> {
    pub fn dormant(seed: u64, base_price: S) -> Self {
        SynthConfig {
            archetype: SynthArchetype::DormantControl,
            seed,
            base_price,
            pump_multiplier: S::one(),
            accumulation_span_minutes: 0,
            spike_count: 0,
            insider_volume_total: S::zero(),
            last_hour_volume_fraction: S::zero(),
            sparsity: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_owned()));
        let f = self.last_hour_volume_fraction;
        if !(self.base_price.is_finite() && self.base_price > S::zero()) {
            return bad("base_price must be > 0");
        }
        if !(self.pump_multiplier.is_finite() && self.pump_multiplier >= S::one()) {
            return bad("pump_multiplier must be >= 1");
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return bad("sparsity must be in [0, 1)");
        }
        if !(f >= S::zero() && f <= S::one()) {
            return bad("last_hour_volume_fraction must be in [0, 1]");
        }
        if !(self.insider_volume_total.is_finite() && self.insider_volume_total >= S::zero()) {
            return bad("insider_volume_total must be >= 0");
        }
        let span = self.accumulation_span_minutes as u64;
        let count = self.spike_count as u64;
        match self.archetype {
            SynthArchetype::DormantControl => {
                if self.pump_multiplier != S::one() || count != 0 {
                    return bad("dormant_control requires pump_multiplier = 1 and spike_count = 0");
                }
            }
            SynthArchetype::PreAccumulated => {
                if self.pump_multiplier <= S::one() {
                    return bad("pre_accumulated requires pump_multiplier > 1");
                }
                if count < 2 {
                    return bad("pre_accumulated requires spike_count >= 2");
                }
                if !(f > S::zero() && f < S::one()) {
                    return bad("pre_accumulated requires 0 < last_hour_volume_fraction < 1");
                }
                let max_span = WINDOW_BEFORE_MINUTES as u64 - LAST_HOUR - 1;
                if !(LAST_HOUR + 1..=max_span).contains(&span) {
                    return bad("pre_accumulated requires 61 <= accumulation_span_minutes <= 5699");
                }
                if count - 2 > span - LAST_HOUR {
                    return bad("too many spikes for the accumulation span");
                }
            }
            SynthArchetype::OnTheSpot => {
                if self.pump_multiplier <= S::one() {
                    return bad("on_the_spot requires pump_multiplier > 1");
                }
                if count > 0 {
                    if span >= LAST_HOUR {
                        return bad("on_the_spot spikes must lie within the last hour (span <= 59)");
                    }
                    if count > span + 1 {
                        return bad("too many spikes for the accumulation span");
                    }
                    if f != S::one() {
                        return bad("on_the_spot places all insider volume in the last hour (fraction = 1)");
                    }
                }
            }
        }
        if count > 0 && self.insider_volume_total <= S::zero() {
            return bad("spikes require insider_volume_total > 0");
        }
        Ok(())
    }
}

/// What the generator put into a window.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth<S> {
    pub key: EventKey,
    pub archetype: SynthArchetype,
    pub true_accum_start: Option<Timestamp>,
    pub true_accum_end: Option<Timestamp>,
    pub true_total_volume: S,
    pub true_peak_high: S,
    pub true_entry_price: Option<S>,
    pub true_concentration_60: Option<S>,
    /// `(delay_minutes, quantity)` per spike, earliest spike first.
    pub spikes: Vec<(u64, S)>,
}

fn r12(x: f64) -> f64 {
    round_sig12(x)
}

fn to_s<S: Scalar>(x: f64) -> S {
    round_sig12(S::lit(x))
}

/// Spike delays (earliest first) and quantities for a validated config.
fn plan_spikes(cfg: &SynthConfig<f64>, rng: &mut SynthRng) -> Vec<(u64, f64)> {
    let count = cfg.spike_count as u64;
    let span = cfg.accumulation_span_minutes as u64;
    if count == 0 {
        return Vec::new();
    }
    let (d_end, d_start, lo) = match cfg.archetype {
        SynthArchetype::PreAccumulated => {
            let d_end = rng.between(1, LAST_HOUR.min(WINDOW_BEFORE_MINUTES as u64 - span));
            (d_end, d_end + span, LAST_HOUR + 1)
        }
        _ => {
            let d_end = rng.between(1, LAST_HOUR - span);
            (d_end, d_end + span, d_end + 1)
        }
    };
    let mut delays = vec![d_start];
    if count >= 2 {
        let middle = if count > 2 { rng.distinct(count - 2, lo, d_start - 1) } else { Vec::new() };
        delays.extend(middle.into_iter().rev());
        delays.push(d_end);
    }
    let v = cfg.insider_volume_total;
    let weights: Vec<f64> = (0..count).map(|_| 0.5 + rng.unit()).collect();
    match cfg.archetype {
        SynthArchetype::PreAccumulated => {
            let f = cfg.last_hour_volume_fraction;
            let early = &weights[..weights.len() - 1];
            let total_w: f64 = early.iter().sum();
            let mut out: Vec<(u64, f64)> =
                delays.iter().zip(early).map(|(&d, w)| (d, r12((1.0 - f) * v * w / total_w))).collect();
            out.push((d_end, r12(f * v)));
            out
        }
        _ => {
            let total_w: f64 = weights.iter().sum();
            delays.iter().zip(&weights).map(|(&d, w)| (d, r12(v * w / total_w))).collect()
        }
    }
}

/// Builds one synthetic event window and its ground truth. Identical
/// `(cfg, key)` always yields the identical window.
pub fn generate_event<S: Scalar>(cfg: &SynthConfig<S>, key: &EventKey) -> Result<(EventWindow<S>, GroundTruth<S>), SynthError> {
    cfg.validate()?;
    let c64 = SynthConfig {
        archetype: cfg.archetype,
        seed: cfg.seed,
        base_price: r12(cfg.base_price.to_f64().unwrap()),
        pump_multiplier: cfg.pump_multiplier.to_f64().unwrap(),
        accumulation_span_minutes: cfg.accumulation_span_minutes,
        spike_count: cfg.spike_count,
        insider_volume_total: cfg.insider_volume_total.to_f64().unwrap(),
        last_hour_volume_fraction: cfg.last_hour_volume_fraction.to_f64().unwrap(),
        sparsity: cfg.sparsity,
    };
    let mut rng = SynthRng::for_event(cfg.seed, key);
    let spikes = plan_spikes(&c64, &mut rng);

    let base = c64.base_price;
    let peak = r12(base * c64.pump_multiplier);
    let pumped = cfg.archetype != SynthArchetype::DormantControl;
    let tick = if spikes.is_empty() {
        0.0
    } else {
        (0.02f64).min(((1.0 + c64.pump_multiplier) / 2.0).ln() / spikes.len() as f64)
    };
    let ramp_up = rng.between(1, MAX_PUMP_RAMP_MINUTES) as i64;
    let ramp_down = rng.between(5, MAX_REVERT_MINUTES - MAX_PUMP_RAMP_MINUTES) as i64;

    let target = key.target_date;
    let mut candles: Vec<Candle<S>> = Vec::with_capacity((WINDOW_BEFORE_MINUTES + WINDOW_AFTER_MINUTES + 1) as usize);
    let mut level = base;
    let mut next_spike = spikes.iter().peekable();
    let flat = |ts, price: f64, q: f64| Candle::flat(ts, to_s::<S>(price), to_s::<S>(q));

    for m in -WINDOW_BEFORE_MINUTES..0 {
        let ts = target.plus_minutes(m);
        if let Some(&&(delay, qty)) = next_spike.peek() {
            if m == -(delay as i64) {
                next_spike.next();
                let open = level;
                let close = r12(level * (1.0 + tick * rng.unit()));
                candles.push(Candle::new(ts, to_s(open), to_s(close), to_s(open), to_s(close), to_s(qty)));
                level = close;
                continue;
            }
        }
        if rng.unit() >= c64.sparsity {
            candles.push(flat(ts, level, 0.0));
        }
    }

    let (up_end, down_end) = if pumped { (ramp_up, ramp_up + ramp_down) } else { (0, 0) };
    let path = |j: i64| -> f64 {
        // price at the end of pump minute j-1; path(0) = level, path(up_end) = peak
        if j <= 0 || j >= down_end {
            level
        } else if j < up_end {
            r12(level + (peak - level) * j as f64 / up_end as f64)
        } else if j == up_end {
            peak
        } else {
            r12(peak + (level - peak) * (j - up_end) as f64 / ramp_down as f64)
        }
    };
    for m in 0..=WINDOW_AFTER_MINUTES {
        let ts = target.plus_minutes(m);
        if m < down_end {
            let (open, close) = (path(m), path(m + 1));
            let q = r12(1000.0 * (1.0 + rng.unit()));
            candles.push(Candle::new(ts, to_s(open), to_s(open.max(close)), to_s(open.min(close)), to_s(close), to_s(q)));
        } else if m == 0 || rng.unit() >= c64.sparsity {
            candles.push(flat(ts, level, 0.0));
        }
    }

    let window = EventWindow::new(key.clone(), candles)
        .map_err(|e| SynthError::InvalidConfig(format!("generated window invalid: {e}")))?;

    let total: S = spikes.iter().map(|&(_, q)| to_s::<S>(q)).fold(S::zero(), |a, b| a + b);
    let truth = GroundTruth {
        key: key.clone(),
        archetype: cfg.archetype,
        true_accum_start: spikes.first().map(|&(d, _)| target.plus_minutes(-(d as i64))),
        true_accum_end: spikes.last().map(|&(d, _)| target.plus_minutes(-(d as i64))),
        true_total_volume: total,
        true_peak_high: to_s(if pumped { peak } else { base }),
        true_entry_price: spikes.first().map(|_| to_s(base)),
        true_concentration_60: match cfg.archetype {
            _ if spikes.is_empty() => None,
            SynthArchetype::PreAccumulated => Some(cfg.last_hour_volume_fraction),
            _ => Some(S::one()),
        },
        spikes: spikes.iter().map(|&(d, q)| (d, to_s(q))).collect(),
    };
    Ok((window, truth))
}

/// Archetype proportions of a corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mix {
    pub pre_accumulated: f64,
    pub on_the_spot: f64,
    pub dormant_control: f64,
}

impl Mix {
    /// 69.3 % of events with visible accumulation, 30.7 % without.
    pub const TABLE1: Mix = Mix { pre_accumulated: 0.693, on_the_spot: 0.307, dormant_control: 0.0 };

    fn shares(&self) -> [f64; 3] {
        [self.pre_accumulated, self.on_the_spot, self.dormant_control]
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let s = self.shares();
        if s.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(SynthError::InvalidMix("proportions must be >= 0".into()));
        }
        let sum: f64 = s.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::InvalidMix(format!("proportions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Event counts per archetype by largest remainder; ties go to the
    /// earlier archetype.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let exact = self.shares().map(|p| p * n as f64);
        let mut counts = exact.map(|x| x.floor() as usize);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        let mut left = n.saturating_sub(counts.iter().sum());
        for i in order.iter().cycle().take(3 * n.max(1)) {
            if left == 0 {
                break;
            }
            counts[*i] += 1;
            left -= 1;
        }
        counts
    }
}

impl FromStr for Mix {
    type Err = SynthError;

    /// `pre,spot,dormant`, e.g. `0.693,0.307,0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SynthError::InvalidMix(e.to_string()))?;
        let [pre_accumulated, on_the_spot, dormant_control] = parts[..] else {
            return Err(SynthError::InvalidMix("expected three comma-separated proportions".into()));
        };
        let mix = Mix { pre_accumulated, on_the_spot, dormant_control };
        mix.validate()?;
        Ok(mix)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorpusParams {
    pub last_hour_volume_fraction: f64,
    pub sparsity: f64,
    pub first_target: Timestamp,
    /// Minutes between consecutive target dates.
    pub target_spacing_minutes: i64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            last_hour_volume_fraction: 0.70,
            sparsity: 0.0,
            first_target: Timestamp::from_millis(1_724_025_600_000), // 2024-08-19T00:00Z
            target_spacing_minutes: 433,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannedEvent<S> {
    pub key: EventKey,
    pub config: SynthConfig<S>,
}

impl<S: Scalar> PlannedEvent<S> {
    pub fn generate(&self) -> Result<(EventWindow<S>, GroundTruth<S>), SynthError> {
        generate_event(&self.config, &self.key)
    }
}

fn log_uniform(rng: &mut SynthRng, lo_exp: f64, hi_exp: f64, sig: i32) -> f64 {
    let x = 10f64.powf(lo_exp + (hi_exp - lo_exp) * rng.unit());
    let scale = 10f64.powi(sig - 1 - x.log10().floor() as i32);
    (x * scale).round() / scale
}

/// Per-event keys and configs of a corpus, a pure function of its inputs.
/// Windows are generated lazily through [`PlannedEvent::generate`].
pub fn plan_corpus<S: Scalar>(n: usize, mix: &Mix, seed: u64, params: &CorpusParams) -> Result<Vec<PlannedEvent<S>>, SynthError> {
    mix.validate()?;
    let counts = mix.counts(n);
    let mut labels: Vec<SynthArchetype> = SynthArchetype::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&a, c)| std::iter::repeat_n(a, c))
        .collect();
    let mut rng = SynthRng::new(seed);
    for i in (1..labels.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        labels.swap(i, j);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, archetype)| {
            let key = EventKey::new(
                format!("SYN{i:04}_USDT"),
                params.first_target.plus_minutes(i as i64 * params.target_spacing_minutes),
            )
            .expect("generated key");
            let base_price = log_uniform(&mut rng, -5.0, 1.0, 6);
            let multiplier = r12(1.5 + 28.5 * rng.unit());
            let mut config = SynthConfig {
                archetype,
                seed,
                base_price: S::lit(base_price),
                pump_multiplier: to_s(multiplier),
                accumulation_span_minutes: 0,
                spike_count: 0,
                insider_volume_total: S::zero(),
                last_hour_volume_fraction: S::one(),
                sparsity: params.sparsity,
            };
            match archetype {
                SynthArchetype::PreAccumulated => {
                    let span = rng.between(61, 5699);
                    config.accumulation_span_minutes = span as u32;
                    config.spike_count = rng.between(2, 2 + (span - 60).min(10)) as u32;
                    config.insider_volume_total = S::lit(log_uniform(&mut rng, 2.0, 7.0, 6));
                    config.last_hour_volume_fraction = S::lit(params.last_hour_volume_fraction);
                }
                SynthArchetype::OnTheSpot => {}
                SynthArchetype::DormantControl => {
                    config.pump_multiplier = S::one();
                    config.last_hour_volume_fraction = S::zero();
                }
            }
            config.validate()?;
            Ok(PlannedEvent { key, config })
        })
        .collect()
}

/// In-memory corpus; use [`plan_corpus`] to stream large corpora instead.
#[derive(Clone, Debug)]
pub struct Corpus<S> {
    pub manifest: EventManifest,
    pub events: Vec<(EventWindow<S>, GroundTruth<S>)>,
}

pub fn generate_corpus<S: Scalar>(n: usize, mix: &Mix, seed: u64, params: &CorpusParams) -> Result<Corpus<S>, SynthError> {
    let plan = plan_corpus::<S>(n, mix, seed, params)?;
    let manifest = EventManifest::new(plan.iter().map(|p| p.key.clone()).collect()).expect("unique generated keys");
    let events = plan.iter().map(PlannedEvent::generate).collect::<Result<_, _>>()?;
    Ok(Corpus { manifest, events })
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn write_ground_truth<S: Scalar>(mut out: impl Write, truths: &[GroundTruth<S>]) -> io::Result<()> {
    writeln!(out, "{GROUND_TRUTH_HEADER}")?;
    for t in truths {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.key.symbol,
            t.key.target_date,
            opt(t.true_accum_start, |x| x.to_string()),
            opt(t.true_accum_end, |x| x.to_string()),
            t.true_total_volume,
            t.true_peak_high,
            opt(t.true_entry_price, |x| x.to_string()),
            opt(t.true_concentration_60, |x| x.to_string()),
        )?;
    }
    Ok(())
}

/// One parsed ground-truth row (the sidecar carries no archetype or spikes).
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthRow<S> {
    pub key: EventKey,
    pub true_accum_start: Option<Timestamp>,
    pub true_accum_end: Option<Timestamp>,
    pub true_total_volume: S,
    pub true_peak_high: S,
    pub true_entry_price: Option<S>,
    pub true_concentration_60: Option<S>,
}

pub fn read_ground_truth<S: Scalar>(input: impl Read) -> Result<Vec<GroundTruthRow<S>>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| IngestError::Parse { line, message: e.to_string() })?;
        let perr = |m: String| IngestError::Parse { line, message: m };
        let ts = |s: &str| -> Result<Option<Timestamp>, IngestError> {
            if s.is_empty() {
                Ok(None)
            } else {
                Timestamp::parse(s).map(Some).map_err(|e| perr(e.to_string()))
            }
        };
        let num = |s: &str| -> Result<Option<S>, IngestError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| perr(format!("bad number `{s}`")))
            }
        };
        let get = |i: usize| rec.get(i).unwrap_or("");
        let key = EventKey::new(get(0), ts(get(1))?.ok_or_else(|| perr("missing target_date".into()))?)
            .map_err(|e| perr(e.to_string()))?;
        rows.push(GroundTruthRow {
            key,
            true_accum_start: ts(get(2))?,
            true_accum_end: ts(get(3))?,
            true_total_volume: num(get(4))?.unwrap_or_default(),
            true_peak_high: num(get(5))?.ok_or_else(|| perr("missing true_peak_high".into()))?,
            true_entry_price: num(get(6))?,
            true_concentration_60: num(get(7))?,
        });
    }
    Ok(rows)
}
