use std::num::NonZeroU32;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tracing::{error, info, warn};
use tracing_subscriber::EnvFilter;

use pumpscope_core::ingestion::{load_manifest, CandleSource, PoloniexSchema, SourceConfig};
use pumpscope_core::model::Timestamp;
use pumpscope_core::pipeline::{self, PipelineError, RunConfig, SynthRun};
use pumpscope_core::synth::{CorpusParams, Mix};
use pumpscope_core::PriceField;

const EXIT_OK: u8 = 0;
const EXIT_SKIPS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

/// Accumulation spans and insider profit bounds for pump-and-dump events.
#[derive(Debug, Parser)]
#[command(name = "pumpscope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download the minute candles around each manifest event.
    Fetch(FetchArgs),
    /// Analyse event windows and write the report bundle.
    Analyze(AnalyzeArgs),
    /// Write a seeded synthetic corpus with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct FetchArgs {
    #[arg(long)]
    manifest_path: PathBuf,
    /// Directory receiving one candle CSV per event.
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides $PUMPSCOPE_BASE_URL and the built-in default.
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    requests_per_second: f64,
    #[arg(long, default_value_t = 500)]
    max_candles_per_request: u32,
    #[arg(long, default_value_t = 5)]
    retry_limit: u32,
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 250)]
    retry_backoff_ms: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    manifest_path: PathBuf,
    /// Directory holding the per-event candle CSVs.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(1..))]
    archetype_threshold_minutes: u32,
    #[arg(long, default_value = "60")]
    histogram_bin_minutes: NonZeroU32,
    /// `close` or `typical`.
    #[arg(long, default_value = "close")]
    vwap_price_field: PriceField,
    /// Comma-separated list of minutes.
    #[arg(long, value_delimiter = ',', default_value = "60", value_parser = clap::value_parser!(u32).range(1..))]
    concentration_horizons: Vec<u32>,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    /// Decimals in profits_aggregate.csv.
    #[arg(long, default_value_t = 2)]
    report_decimals: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    /// Proportions `pre_accumulated,on_the_spot,dormant_control`, summing to 1.
    #[arg(long, default_value = "0.693,0.307,0")]
    mix: Mix,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.70)]
    last_hour_volume_fraction: f64,
    /// Probability that a filler minute has no candle.
    #[arg(long, default_value_t = 0.0)]
    sparsity: f64,
    /// Target date of the first event (ISO-8601 or epoch ms).
    #[arg(long)]
    first_target: Option<Timestamp>,
    #[arg(long)]
    target_spacing_minutes: Option<i64>,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn run_fetch(args: FetchArgs) -> anyhow::Result<u8> {
    let cfg = SourceConfig {
        requests_per_second: args.requests_per_second,
        max_candles_per_request: args.max_candles_per_request,
        retry_limit: args.retry_limit,
        timeout: Duration::from_secs(args.timeout_secs),
        retry_backoff: Duration::from_millis(args.retry_backoff_ms),
        ..SourceConfig::default()
    }
    .with_env_override()
    .with_base_url_override(args.base_url);
    if let Err(e) = cfg.validate() {
        error!("{e}");
        return Ok(EXIT_USAGE);
    }
    let manifest = match load_manifest(&args.manifest_path) {
        Ok(m) => m,
        Err(e) => {
            error!("{e}");
            return Ok(EXIT_USAGE);
        }
    };
    let source = CandleSource::with_schema(cfg, Arc::new(PoloniexSchema)).context("building HTTP client")?;
    let summary = match pipeline::fetch_events(&manifest, &source, &args.out_dir, args.jobs) {
        Ok(s) => s,
        Err(e) => return Ok(report_pipeline_error(e)),
    };
    info!(
        fetched = summary.fetched,
        already_present = summary.already_present,
        failed = summary.failed.len(),
        "fetch finished"
    );
    for (key, reason) in &summary.failed {
        warn!(event = %key, "{reason}");
    }
    Ok(if summary.failed.is_empty() { EXIT_OK } else { EXIT_IO })
}

fn run_analyze(args: AnalyzeArgs) -> u8 {
    let cfg = RunConfig {
        manifest_path: args.manifest_path,
        data_dir: args.data_dir,
        output_dir: args.output_dir,
        archetype_threshold_minutes: args.archetype_threshold_minutes,
        histogram_bin_minutes: args.histogram_bin_minutes,
        vwap_price_field: args.vwap_price_field,
        concentration_horizons: args.concentration_horizons,
        jobs: args.jobs,
        report_decimals: args.report_decimals,
    };
    match pipeline::analyze(&cfg) {
        Ok(outcome) if outcome.has_skips() => {
            warn!(
                skipped_load = outcome.counts.skipped_load,
                skipped_profit = outcome.counts.skipped_profit,
                "completed with skips, see skips.csv"
            );
            EXIT_SKIPS
        }
        Ok(_) => EXIT_OK,
        Err(e) => report_pipeline_error(e),
    }
}

fn run_synth(args: SynthArgs) -> u8 {
    let defaults = CorpusParams::default();
    let params = CorpusParams {
        last_hour_volume_fraction: args.last_hour_volume_fraction,
        sparsity: args.sparsity,
        first_target: args.first_target.unwrap_or(defaults.first_target),
        target_spacing_minutes: args.target_spacing_minutes.unwrap_or(defaults.target_spacing_minutes),
    };
    let run = SynthRun { n: args.n, mix: args.mix, seed: args.seed, params, jobs: args.jobs };
    match pipeline::write_corpus(&run, &args.out_dir) {
        Ok(()) => EXIT_OK,
        Err(e) => report_pipeline_error(e),
    }
}

fn report_pipeline_error(e: PipelineError) -> u8 {
    error!("{e}");
    match e.exit_code() {
        2 => EXIT_USAGE,
        _ => EXIT_IO,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Fetch(args) => run_fetch(args).unwrap_or_else(|e| {
            error!("{e:#}");
            EXIT_IO
        }),
        Command::Analyze(args) => run_analyze(args),
        Command::Synth(args) => run_synth(args),
    };
    ExitCode::from(code)
}
