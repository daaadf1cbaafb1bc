//! Per-tick simulation record and its CSV form.

use std::io::{Read, Write};

use thiserror::Error;

use crate::numfmt::fmt_sig;

pub const TRACE_HEADER: [&str; 8] = [
    "tick",
    "bus_voltage",
    "rel_voltage",
    "n_flexible_on",
    "price",
    "n_postponed",
    "n_vetoed",
    "n_forced",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub bus_voltage: f64,
    pub rel_voltage: f64,
    pub n_flexible_on: usize,
    /// Market price in effect; absent for fridge runs.
    pub price: Option<f64>,
    /// Agents deferring a due activation at the end of the tick.
    pub n_postponed: usize,
    /// Price-motivated starts blocked by the voltage check this tick.
    pub n_vetoed: usize,
    /// Must-run activations this tick.
    pub n_forced: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub n_agents: usize,
    pub rows: Vec<TraceRow>,
    /// Spread `max - min` of washer reference prices after each tick.
    pub expectation_spread: Vec<f64>,
}

impl SimTrace {
    pub fn new(n_agents: usize) -> Self {
        Self {
            n_agents,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rel_voltage(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rel_voltage).collect()
    }

    pub fn n_flexible_on(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n_flexible_on).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.tick.to_string(),
                fmt_sig(r.bus_voltage),
                fmt_sig(r.rel_voltage),
                r.n_flexible_on.to_string(),
                r.price.map(fmt_sig).unwrap_or_default(),
                r.n_postponed.to_string(),
                r.n_vetoed.to_string(),
                r.n_forced.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Parses a trace written by [`SimTrace::write_csv`]. The agent count is
    /// not part of the file and is left at zero.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, TraceError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
        let header = reader.headers()?.clone();
        if header.iter().ne(TRACE_HEADER.iter().copied()) {
            return Err(TraceError::Parse {
                line: 1,
                message: format!("expected header {}", TRACE_HEADER.join(",")),
            });
        }
        let mut trace = SimTrace::default();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |column: &str, text: &str| TraceError::Parse {
                line,
                message: format!("bad {column} value {text:?}"),
            };
            let int = |i: usize| -> Result<u64, TraceError> {
                record[i].parse().map_err(|_| bad(TRACE_HEADER[i], &record[i]))
            };
            let float = |i: usize| -> Result<f64, TraceError> {
                record[i].parse().map_err(|_| bad(TRACE_HEADER[i], &record[i]))
            };
            trace.rows.push(TraceRow {
                tick: int(0)?,
                bus_voltage: float(1)?,
                rel_voltage: float(2)?,
                n_flexible_on: int(3)? as usize,
                price: if record[4].is_empty() { None } else { Some(float(4)?) },
                n_postponed: int(5)? as usize,
                n_vetoed: int(6)? as usize,
                n_forced: int(7)? as usize,
            });
        }
        Ok(trace)
    }
}
