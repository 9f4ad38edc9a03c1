//! CSV renderers for the report bundle and atomic file output.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::accumulation::{Archetype, Histogram, PrevalenceReport, SpanStats};
use crate::model::{AccumulationSpan, EventKey};
use crate::profit::{EventProfit, ScenarioAggregate, REPORTED_PERCENTILES};
use crate::scalar::{format_sig12, Scalar};

pub const SPANS_HEADER: &str = "symbol,target_date,accum_start,accum_end,span_minutes,archetype";
pub const PREVALENCE_HEADER: &str = "total_events,with_accumulation,without_accumulation,with_pct,without_pct";
pub const SPAN_STATS_HEADER: &str = "count,minimum,average,maximum,std_dev";
pub const HISTOGRAM_HEADER: &str = "bin_lower_minutes,count";
pub const PROFITS_PER_EVENT_HEADER: &str =
    "symbol,target_date,scenario,volume,proxy_price,peak_high,cost,proceeds,profit_abs,profit_pct";
pub const CONCENTRATION_HEADER: &str = "scope,symbol,target_date,horizon_minutes,concentration";
pub const SKIPS_HEADER: &str = "symbol,target_date,stage,reason";

/// Writes `path` through a temporary file in the same directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::with_capacity(1 << 16, tmp.as_file());
        fill(&mut out)?;
        out.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Quotes a CSV field only when it needs it.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub struct SpanRow<'a> {
    pub key: &'a EventKey,
    pub span: AccumulationSpan,
    pub span_minutes: Option<u64>,
    pub archetype: Archetype,
}

pub fn write_spans<'a>(out: &mut dyn Write, rows: impl IntoIterator<Item = SpanRow<'a>>) -> io::Result<()> {
    writeln!(out, "{SPANS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            field(&r.key.symbol),
            r.key.target_date,
            r.span.accum_start().map(|t| t.to_string()).unwrap_or_default(),
            r.span.accum_end().map(|t| t.to_string()).unwrap_or_default(),
            r.span_minutes.map(|m| m.to_string()).unwrap_or_default(),
            r.archetype
        )?;
    }
    Ok(())
}

pub fn write_prevalence(out: &mut dyn Write, p: &PrevalenceReport) -> io::Result<()> {
    writeln!(out, "{PREVALENCE_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{:.1},{:.1}",
        p.total_events, p.with_accumulation, p.without_accumulation, p.with_pct, p.without_pct
    )
}

/// Header only when there are no accumulation events.
pub fn write_span_stats(out: &mut dyn Write, stats: Option<&SpanStats>) -> io::Result<()> {
    writeln!(out, "{SPAN_STATS_HEADER}")?;
    if let Some(s) = stats {
        writeln!(out, "{},{},{:.1},{},{:.1}", s.count, s.minimum, s.average, s.maximum, s.std_dev)?;
    }
    Ok(())
}

pub fn write_histogram(out: &mut dyn Write, h: &Histogram) -> io::Result<()> {
    writeln!(out, "{HISTOGRAM_HEADER}")?;
    for (lower, count) in &h.bins {
        writeln!(out, "{lower},{count}")?;
    }
    Ok(())
}

pub fn write_profits_per_event<S: Scalar>(out: &mut dyn Write, events: &[EventProfit<S>]) -> io::Result<()> {
    writeln!(out, "{PROFITS_PER_EVENT_HEADER}")?;
    for e in events {
        for est in &e.estimates {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                field(&e.key.symbol),
                e.key.target_date,
                est.scenario,
                format_sig12(est.volume),
                format_sig12(est.proxy_price),
                format_sig12(est.peak_high),
                format_sig12(est.cost),
                format_sig12(est.proceeds),
                format_sig12(est.profit_abs),
                format_sig12(est.profit_pct)
            )?;
        }
    }
    Ok(())
}

pub fn profits_aggregate_header() -> String {
    let mut cols: Vec<String> = [
        "scenario",
        "avg_profit_abs",
        "median_profit_abs",
        "avg_profit_pct",
        "median_profit_pct",
        "event_count",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for metric in ["profit_abs", "profit_pct"] {
        for p in REPORTED_PERCENTILES {
            cols.push(format!("p{p}_{metric}"));
        }
    }
    cols.join(",")
}

/// One row per scenario with values at a fixed number of decimals.
/// Header only when no event reached profit estimation.
pub fn write_profits_aggregate<S: Scalar>(
    out: &mut dyn Write,
    aggregates: Option<&[ScenarioAggregate<S>]>,
    decimals: usize,
) -> io::Result<()> {
    writeln!(out, "{}", profits_aggregate_header())?;
    for a in aggregates.unwrap_or_default() {
        let fx = |v: S| format!("{:.*}", decimals, v.to_f64().unwrap_or(f64::NAN));
        let mut cols = vec![
            a.scenario.to_string(),
            fx(a.avg_profit_abs()),
            fx(a.median_profit_abs()),
            fx(a.avg_profit_pct()),
            fx(a.median_profit_pct()),
            a.event_count.to_string(),
        ];
        for dist in [&a.profit_abs, &a.profit_pct] {
            cols.extend(dist.percentiles.values().map(|&v| fx(v)));
        }
        writeln!(out, "{}", cols.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationRow<S> {
    /// `event`, `volume_weighted` or `per_event_median`.
    pub scope: &'static str,
    pub key: Option<EventKey>,
    pub horizon_minutes: u32,
    pub value: Option<S>,
}

pub fn write_concentration<S: Scalar>(out: &mut dyn Write, rows: &[ConcentrationRow<S>]) -> io::Result<()> {
    writeln!(out, "{CONCENTRATION_HEADER}")?;
    for r in rows {
        let (sym, ts) = match &r.key {
            Some(k) => (field(&k.symbol), k.target_date.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            r.scope,
            sym,
            ts,
            r.horizon_minutes,
            r.value.map(format_sig12).unwrap_or_default()
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SkipRow {
    pub key: EventKey,
    pub stage: &'static str,
    pub reason: String,
}

pub fn write_skips(out: &mut dyn Write, rows: &[SkipRow]) -> io::Result<()> {
    writeln!(out, "{SKIPS_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", field(&r.key.symbol), r.key.target_date, r.stage, field(&r.reason))?;
    }
    Ok(())
}
