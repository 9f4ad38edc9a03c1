//! End-to-end runs behind the CLI: fetching event windows, writing a
//! synthetic corpus, and analysing a manifest into a report bundle.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use tracing::{info, warn};

use crate::accumulation::{
    classify_archetype, compute_accumulation_span, pre_pump_volume_split, prevalence, span_histogram, span_minutes,
    span_stats, Archetype, DEFAULT_HORIZON_MINUTES,
};
use crate::ingestion::{
    candle_file_name, load_candles_csv, load_manifest, slice_window, write_candles_csv, write_manifest,
    CandleSource, EventManifest, FetchError, IngestError,
};
use crate::model::{AccumulationSpan, EventKey};
use crate::profit::{aggregate, run_event, EventProfit, PriceField};
use crate::report::{self, write_atomic, ConcentrationRow, SkipRow, SpanRow};
use crate::stats;
use crate::synth::{plan_corpus, write_ground_truth, CorpusParams, Mix, SynthError};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const CANDLES_DIR: &str = "candles";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Every file of an analysis bundle, in the order they are written.
pub const REPORT_FILES: [&str; 9] = [
    "spans.csv",
    "prevalence.csv",
    "span_stats.csv",
    "histogram.csv",
    "profits_per_event.csv",
    "profits_aggregate.csv",
    "concentration.csv",
    "skips.csv",
    "summary.json",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl PipelineError {
    /// 2 for configuration/usage problems, 3 for I/O or network failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Synth(_) => 2,
            PipelineError::Fetch(FetchError::InvalidConfig(_) | FetchError::InvalidRange { .. }) => 2,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_owned(), source }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start {jobs} workers: {e}")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub archetype_threshold_minutes: u32,
    pub histogram_bin_minutes: NonZeroU32,
    pub vwap_price_field: PriceField,
    pub concentration_horizons: Vec<u32>,
    pub jobs: usize,
    /// Decimals used in the aggregate profit table.
    pub report_decimals: usize,
}

impl RunConfig {
    pub fn new(manifest_path: impl Into<PathBuf>, data_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            manifest_path: manifest_path.into(),
            data_dir: data_dir.into(),
            output_dir: output_dir.into(),
            archetype_threshold_minutes: DEFAULT_HORIZON_MINUTES,
            histogram_bin_minutes: NonZeroU32::new(60).unwrap(),
            vwap_price_field: PriceField::Close,
            concentration_horizons: vec![DEFAULT_HORIZON_MINUTES],
            jobs: 1,
            report_decimals: 2,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.archetype_threshold_minutes == 0 {
            return Err(PipelineError::Config("archetype-threshold-minutes must be > 0".into()));
        }
        if self.concentration_horizons.is_empty() || self.concentration_horizons.contains(&0) {
            return Err(PipelineError::Config("concentration-horizons must be positive minutes".into()));
        }
        if !self.manifest_path.is_file() {
            return Err(PipelineError::Config(format!("manifest not found: {}", self.manifest_path.display())));
        }
        if !self.data_dir.is_dir() {
            return Err(PipelineError::Config(format!("data dir not found: {}", self.data_dir.display())));
        }
        Ok(())
    }
}

struct EventOutcome {
    key: EventKey,
    span: AccumulationSpan,
    archetype: Archetype,
    /// `(horizon, inside, total)` pre-pump volume per horizon.
    volume_split: Vec<(u32, f64, f64)>,
    profit: Option<EventProfit<f64>>,
}

fn process_event(cfg: &RunConfig, key: &EventKey) -> (Option<EventOutcome>, Option<SkipRow>) {
    let path = cfg.data_dir.join(candle_file_name(key));
    if !path.is_file() {
        let reason = format!("missing data file {}", candle_file_name(key));
        return (None, Some(SkipRow { key: key.clone(), stage: "load", reason }));
    }
    let candles = match load_candles_csv::<f64>(&path) {
        Ok(c) => c,
        Err(e) => {
            let reason = format!("invalid data file: {e}");
            return (None, Some(SkipRow { key: key.clone(), stage: "load", reason }));
        }
    };
    let window = slice_window(&candles, key);
    drop(candles);
    let span = compute_accumulation_span(&window);
    let archetype = classify_archetype(&span, &window, cfg.archetype_threshold_minutes);
    let volume_split = cfg
        .concentration_horizons
        .iter()
        .map(|&h| {
            let (inside, total) = pre_pump_volume_split(&window, h);
            (h, inside, total)
        })
        .collect();
    let (profit, skip) = match run_event(&window, &span, cfg.vwap_price_field) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(SkipRow { key: key.clone(), stage: "profit", reason: e.to_string() })),
    };
    (Some(EventOutcome { key: key.clone(), span, archetype, volume_split, profit }), skip)
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
struct ConfigEcho {
    manifest_file: String,
    archetype_threshold_minutes: u32,
    histogram_bin_minutes: u32,
    vwap_price_field: &'static str,
    concentration_horizons: Vec<u32>,
    report_decimals: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct AnalysisCounts {
    pub manifest_events: usize,
    pub analysed_events: usize,
    pub with_accumulation: usize,
    pub profit_events: usize,
    pub skipped_load: usize,
    pub skipped_profit: usize,
}

#[derive(Clone, Debug, Serialize)]
struct Summary {
    config: ConfigEcho,
    counts: AnalysisCounts,
    quote_currencies: Vec<String>,
    mixed_quote_aggregation: bool,
    files: Vec<&'static str>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisOutcome {
    pub counts: AnalysisCounts,
}

impl AnalysisOutcome {
    pub fn has_skips(&self) -> bool {
        self.counts.skipped_load + self.counts.skipped_profit > 0
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Runs span detection and profit estimation for every manifest event and
/// writes the report bundle. Events that cannot be analysed are listed in
/// `skips.csv`; rows are sorted by `(symbol, target_date)`.
pub fn analyze(cfg: &RunConfig) -> Result<AnalysisOutcome, PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let manifest = load_manifest(&cfg.manifest_path)?;
    let pool = thread_pool(cfg.jobs)?;
    let results: Vec<_> = pool.install(|| manifest.entries().par_iter().map(|k| process_event(cfg, k)).collect());

    let mut outcomes: Vec<EventOutcome> = Vec::with_capacity(results.len());
    let mut skips: Vec<SkipRow> = Vec::new();
    for (o, s) in results {
        outcomes.extend(o);
        skips.extend(s);
    }
    outcomes.sort_by(|a, b| a.key.cmp(&b.key));
    skips.sort();

    let spans: Vec<AccumulationSpan> = outcomes.iter().map(|o| o.span).collect();
    let profits: Vec<EventProfit<f64>> = outcomes.iter().filter_map(|o| o.profit.clone()).collect();
    let aggregates = aggregate(&profits).ok();
    let stats = span_stats(&spans).ok();
    let prevalence = prevalence(&spans);
    let histogram = span_histogram(&spans, cfg.histogram_bin_minutes);

    let mut concentration: Vec<ConcentrationRow<f64>> = Vec::new();
    for &h in &cfg.concentration_horizons {
        let mut inside_sum = 0.0;
        let mut total_sum = 0.0;
        let mut per_event = Vec::new();
        for o in &outcomes {
            let &(_, inside, total) = o.volume_split.iter().find(|s| s.0 == h).expect("horizon computed");
            let value = (total > 0.0).then(|| inside / total);
            if let Some(v) = value {
                per_event.push(v);
                inside_sum += inside;
                total_sum += total;
            }
            concentration.push(ConcentrationRow { scope: "event", key: Some(o.key.clone()), horizon_minutes: h, value });
        }
        concentration.push(ConcentrationRow {
            scope: "volume_weighted",
            key: None,
            horizon_minutes: h,
            value: (total_sum > 0.0).then(|| inside_sum / total_sum),
        });
        concentration.push(ConcentrationRow {
            scope: "per_event_median",
            key: None,
            horizon_minutes: h,
            value: stats::median_sorted(&stats::sorted(per_event)),
        });
    }

    let quotes: BTreeSet<String> = profits
        .iter()
        .map(|p| p.key.quote_currency().unwrap_or("").to_owned())
        .collect();
    let counts = AnalysisCounts {
        manifest_events: manifest.len(),
        analysed_events: outcomes.len(),
        with_accumulation: prevalence.with_accumulation,
        profit_events: profits.len(),
        skipped_load: skips.iter().filter(|s| s.stage == "load").count(),
        skipped_profit: skips.iter().filter(|s| s.stage == "profit").count(),
    };
    let summary = Summary {
        config: ConfigEcho {
            manifest_file: file_name(&cfg.manifest_path),
            archetype_threshold_minutes: cfg.archetype_threshold_minutes,
            histogram_bin_minutes: cfg.histogram_bin_minutes.get(),
            vwap_price_field: cfg.vwap_price_field.as_str(),
            concentration_horizons: cfg.concentration_horizons.clone(),
            report_decimals: cfg.report_decimals,
        },
        counts: counts.clone(),
        mixed_quote_aggregation: quotes.len() > 1,
        quote_currencies: quotes.into_iter().collect(),
        files: REPORT_FILES.to_vec(),
    };

    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let write = |name: &str, fill: &dyn Fn(&mut dyn io::Write) -> io::Result<()>| {
        let path = out.join(name);
        write_atomic(&path, |w| fill(w)).map_err(io_err(&path))
    };
    write("spans.csv", &|w| {
        report::write_spans(
            w,
            outcomes.iter().map(|o| SpanRow {
                key: &o.key,
                span: o.span,
                span_minutes: span_minutes(&o.span),
                archetype: o.archetype,
            }),
        )
    })?;
    write("prevalence.csv", &|w| report::write_prevalence(w, &prevalence))?;
    write("span_stats.csv", &|w| report::write_span_stats(w, stats.as_ref()))?;
    write("histogram.csv", &|w| report::write_histogram(w, &histogram))?;
    write("profits_per_event.csv", &|w| report::write_profits_per_event(w, &profits))?;
    write("profits_aggregate.csv", &|w| {
        report::write_profits_aggregate(w, aggregates.as_ref().map(|a| &a[..]), cfg.report_decimals)
    })?;
    write("concentration.csv", &|w| report::write_concentration(w, &concentration))?;
    write("skips.csv", &|w| report::write_skips(w, &skips))?;
    write("summary.json", &|w| {
        serde_json::to_writer_pretty(&mut *w, &summary).map_err(io::Error::other)?;
        writeln!(w)
    })?;

    info!(
        events = counts.manifest_events,
        with_accumulation = counts.with_accumulation,
        profit_events = counts.profit_events,
        skipped = skips.len(),
        elapsed_ms = started.elapsed().as_millis() as u64,
        "analysis complete"
    );
    Ok(AnalysisOutcome { counts })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthRun {
    pub n: usize,
    pub mix: Mix,
    pub seed: u64,
    pub params: CorpusParams,
    pub jobs: usize,
}

/// Writes `manifest.csv`, `candles/<event>.csv` and `ground_truth.csv`
/// under `out_dir`. Output depends only on `(n, mix, seed, params)`.
pub fn write_corpus(run: &SynthRun, out_dir: &Path) -> Result<(), PipelineError> {
    let plan = plan_corpus::<f64>(run.n, &run.mix, run.seed, &run.params)?;
    let candles_dir = out_dir.join(CANDLES_DIR);
    fs::create_dir_all(&candles_dir).map_err(io_err(&candles_dir))?;
    let pool = thread_pool(run.jobs)?;
    let truths = pool.install(|| {
        plan.par_iter()
            .map(|p| {
                let (window, truth) = p.generate()?;
                let path = candles_dir.join(candle_file_name(&p.key));
                write_atomic(&path, |w| write_candles_csv(w, window.candles())).map_err(io_err(&path))?;
                Ok(truth)
            })
            .collect::<Result<Vec<_>, PipelineError>>()
    })?;
    let manifest = EventManifest::new(plan.iter().map(|p| p.key.clone()).collect())?;
    let mpath = out_dir.join(MANIFEST_FILE);
    write_atomic(&mpath, |w| write_manifest(w, &manifest)).map_err(io_err(&mpath))?;
    let gpath = out_dir.join(GROUND_TRUTH_FILE);
    write_atomic(&gpath, |w| write_ground_truth(w, &truths)).map_err(io_err(&gpath))?;
    info!(events = run.n, dir = %out_dir.display(), "synthetic corpus written");
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FetchSummary {
    pub fetched: usize,
    pub already_present: usize,
    pub failed: Vec<(EventKey, String)>,
}

/// Downloads each event's window into `out_dir/<event>.csv`. Files that
/// already exist are complete (they are written atomically) and skipped.
pub fn fetch_events(
    manifest: &EventManifest,
    source: &CandleSource,
    out_dir: &Path,
    jobs: usize,
) -> Result<FetchSummary, PipelineError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let pool = thread_pool(jobs)?;
    let results: Vec<(EventKey, Result<bool, String>)> = pool.install(|| {
        manifest
            .entries()
            .par_iter()
            .map(|key| {
                let path = out_dir.join(candle_file_name(key));
                if path.is_file() {
                    return (key.clone(), Ok(false));
                }
                let outcome = source
                    .fetch_candles::<f64>(&key.symbol, key.window_start(), key.window_end().plus_minutes(1))
                    .map_err(|e| e.to_string())
                    .and_then(|candles| {
                        write_atomic(&path, |w| write_candles_csv(w, &candles)).map_err(|e| e.to_string())
                    })
                    .map(|_| true);
                if let Err(e) = &outcome {
                    warn!(event = %key, error = %e, "fetch failed");
                }
                (key.clone(), outcome)
            })
            .collect()
    });
    let mut summary = FetchSummary::default();
    for (key, r) in results {
        match r {
            Ok(true) => summary.fetched += 1,
            Ok(false) => summary.already_present += 1,
            Err(e) => summary.failed.push((key, e)),
        }
    }
    summary.failed.sort();
    Ok(summary)
}
