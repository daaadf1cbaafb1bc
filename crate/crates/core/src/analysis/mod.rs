//! Trace metrics and time-of-day profiling.

mod profile;

pub use profile::{
    detect_periodic_deviation, parse_seconds_of_day, read_frequency_csv, time_of_day_profile, BinStats,
    TimeOfDayProfile, DAY_SECONDS,
};

use std::io::{Read, Write};

use thiserror::Error;

use crate::numfmt::fmt_sig;
use crate::trace::SimTrace;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("band must satisfy 0 < low < high, got [{0}, {1}]")]
    InvalidBand(f64, f64),
    #[error("bin width {0} s must be positive and divide 86400")]
    BinWidth(u32),
    #[error("period {period} s must be a positive multiple of the bin width {bin_width} s")]
    Period { period: u32, bin_width: u32 },
    #[error("period {0} s leaves no bins on one side of the comparison")]
    DegeneratePeriod(u32),
    #[error("all bins are missing")]
    AllBinsMissing,
    #[error("line {line}: cannot parse timestamp {text:?}")]
    Timestamp { line: u64, text: String },
    #[error("line {line}: cannot parse value {text:?}")]
    Value { line: u64, text: String },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Tolerance band on the relative voltage. Values strictly outside are out
/// of band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub fn new(low: f64, high: f64) -> Result<Self, AnalysisError> {
        if low > 0.0 && low < high && high.is_finite() {
            Ok(Self { low, high })
        } else {
            Err(AnalysisError::InvalidBand(low, high))
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.low && x <= self.high
    }
}

/// Number of band entries plus exits along `series`. `prev_in_band` is the
/// state before the first sample.
pub fn band_crossings(series: &[f64], band: Band, prev_in_band: bool) -> usize {
    let mut inside = prev_in_band;
    let mut crossings = 0;
    for &x in series {
        let now = band.contains(x);
        if now != inside {
            crossings += 1;
            inside = now;
        }
    }
    crossings
}

/// Band crossings among the trace rows with `start <= tick <= end`. The
/// state before the window is taken from the row preceding it.
pub fn band_crossings_between(trace: &SimTrace, band: Band, start: u64, end: u64) -> usize {
    let rows = &trace.rows;
    let lo = rows.partition_point(|r| r.tick < start);
    let hi = rows.partition_point(|r| r.tick <= end);
    if lo >= hi {
        return 0;
    }
    let prev = lo.checked_sub(1).is_none_or(|i| band.contains(rows[i].rel_voltage));
    let window: Vec<f64> = rows[lo..hi].iter().map(|r| r.rel_voltage).collect();
    band_crossings(&window, band, prev)
}

/// Index of the first sample after which the series never leaves the band,
/// or `None` if the series ends out of band.
pub fn settling_index(series: &[f64], band: Band) -> Option<usize> {
    match series.iter().rposition(|&x| !band.contains(x)) {
        None => Some(0),
        Some(last_out) if last_out + 1 < series.len() => Some(last_out + 1),
        Some(_) => None,
    }
}

/// Observed standard deviation of the number of agents on, normalized by
/// the standard deviation expected from independent agents with the same
/// mean occupancy. `None` when the window is shorter than two samples or
/// the occupancy is 0 or 1.
pub fn synchronization_index(n_on: &[usize], n_agents: usize) -> Option<f64> {
    if n_on.len() < 2 || n_agents == 0 {
        return None;
    }
    let len = n_on.len() as f64;
    let mean = n_on.iter().map(|&k| k as f64).sum::<f64>() / len;
    let p_hat = mean / n_agents as f64;
    if p_hat <= 0.0 || p_hat >= 1.0 {
        return None;
    }
    let var = n_on.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / len;
    Some(var.sqrt() / (n_agents as f64 * p_hat * (1.0 - p_hat)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub band: Band,
    pub min_rel_voltage: f64,
    pub max_rel_voltage: f64,
    pub band_crossings: usize,
    pub settling_tick: Option<u64>,
    pub sync_index: Option<f64>,
    /// Spread of washer reference prices per tick; empty for fridge runs.
    pub expectation_dispersion: Vec<f64>,
}

pub const REPORT_HEADER: [&str; 9] = [
    "band_low",
    "band_high",
    "min_rel_voltage",
    "max_rel_voltage",
    "band_crossings",
    "settling_tick",
    "sync_index",
    "expectation_dispersion_start",
    "expectation_dispersion_end",
];

pub fn stability_metrics(trace: &SimTrace, band: Band) -> Result<StabilityReport, AnalysisError> {
    if trace.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    let rel = trace.rel_voltage();
    let (min, max) = rel.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    Ok(StabilityReport {
        band,
        min_rel_voltage: min,
        max_rel_voltage: max,
        band_crossings: band_crossings(&rel, band, true),
        settling_tick: settling_index(&rel, band).map(|i| trace.rows[i].tick),
        sync_index: synchronization_index(&trace.n_flexible_on(), trace.n_agents),
        expectation_dispersion: trace.expectation_spread.clone(),
    })
}

impl StabilityReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_HEADER)?;
        w.write_record([
            fmt_sig(self.band.low),
            fmt_sig(self.band.high),
            fmt_sig(self.min_rel_voltage),
            fmt_sig(self.max_rel_voltage),
            self.band_crossings.to_string(),
            self.settling_tick.map(|t| t.to_string()).unwrap_or_default(),
            opt(self.sync_index),
            opt(self.expectation_dispersion.first().copied()),
            opt(self.expectation_dispersion.last().copied()),
        ])?;
        w.flush()?;
        Ok(())
    }

    /// Reads back a report written by [`StabilityReport::write_csv`]. Only
    /// the first and last dispersion values survive the round trip.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, AnalysisError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(source);
        let header = reader.headers()?.clone();
        if header.iter().ne(REPORT_HEADER.iter().copied()) {
            return Err(AnalysisError::Format {
                line: 1,
                message: format!("expected header {}", REPORT_HEADER.join(",")),
            });
        }
        let record = reader.records().next().ok_or(AnalysisError::Format {
            line: 2,
            message: "missing report row".into(),
        })??;
        let bad = |i: usize| AnalysisError::Format {
            line: 2,
            message: format!("bad {} value {:?}", REPORT_HEADER[i], &record[i]),
        };
        let float = |i: usize| record[i].parse::<f64>().map_err(|_| bad(i));
        let opt_float = |i: usize| -> Result<Option<f64>, AnalysisError> {
            if record[i].is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        let settling_tick = if record[5].is_empty() {
            None
        } else {
            Some(record[5].parse().map_err(|_| bad(5))?)
        };
        let expectation_dispersion = [opt_float(7)?, opt_float(8)?].into_iter().flatten().collect();
        Ok(Self {
            band: Band::new(float(0)?, float(1)?)?,
            min_rel_voltage: float(2)?,
            max_rel_voltage: float(3)?,
            band_crossings: record[4].parse().map_err(|_| bad(4))?,
            settling_tick,
            sync_index: opt_float(6)?,
            expectation_dispersion,
        })
    }
}
