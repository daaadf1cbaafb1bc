//! Piecewise-constant market price signal.
//!
//! Prices change only at market period boundaries; within a period every tick
//! sees the same price. Series are either generated from a mean-reverting
//! process with scheduled overrides or read from a one-column CSV.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numfmt::fmt_sig;
use crate::rng::{self, Domain};

#[derive(Debug, Error)]
pub enum PriceError {
    #[error("no price data")]
    Empty,
    #[error("line {line}: cannot parse {text:?} as a price")]
    Parse { line: u64, text: String },
    #[error("line {line}: price must be finite and non-negative, got {value}")]
    Invalid { line: u64, value: f64 },
    #[error("line {line}: expected one column, found {found}")]
    Columns { line: u64, found: usize },
    #[error("period_length must be at least 1")]
    PeriodLength,
    #[error("{field} must be finite and non-negative, got {value}")]
    Param { field: &'static str, value: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    period_length: u64,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(period_length: u64, prices: Vec<f64>) -> Result<Self, PriceError> {
        if period_length == 0 {
            return Err(PriceError::PeriodLength);
        }
        if prices.is_empty() {
            return Err(PriceError::Empty);
        }
        if let Some((i, &value)) = prices.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(PriceError::Invalid {
                line: i as u64 + 1,
                value,
            });
        }
        Ok(Self { period_length, prices })
    }

    pub fn period_length(&self) -> u64 {
        self.period_length
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn n_periods(&self) -> usize {
        self.prices.len()
    }

    /// Number of ticks the series covers.
    pub fn n_ticks(&self) -> u64 {
        self.period_length * self.prices.len() as u64
    }

    pub fn period_of(&self, tick: u64) -> usize {
        (tick / self.period_length) as usize
    }

    pub fn price_at(&self, tick: u64) -> Option<f64> {
        self.prices.get(self.period_of(tick)).copied()
    }
}

/// Parameters of the exogenous price generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceProcessParams {
    pub mean: f64,
    pub reversion: f64,
    pub noise_std: f64,
    /// Starting price; defaults to `mean`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
    /// `(period index, price)` overrides applied after generation.
    #[serde(default)]
    pub low_price_events: Vec<(usize, f64)>,
}

impl PriceProcessParams {
    pub fn validate(&self) -> Result<(), PriceError> {
        let nonneg = |field, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(PriceError::Param { field, value })
            }
        };
        nonneg("mean", self.mean)?;
        nonneg("noise_std", self.noise_std)?;
        nonneg("reversion", self.reversion)?;
        if self.reversion > 1.0 {
            return Err(PriceError::Param {
                field: "reversion",
                value: self.reversion,
            });
        }
        if let Some(p0) = self.initial {
            nonneg("initial", p0)?;
        }
        for &(_, p) in &self.low_price_events {
            nonneg("low_price_events", p)?;
        }
        Ok(())
    }
}

/// Mean-reverting AR(1) recursion clamped at zero, then overrides.
pub fn generate_price_series<R: Rng + ?Sized>(
    params: &PriceProcessParams,
    period_length: u64,
    n_periods: usize,
    rng: &mut R,
) -> Result<PriceSeries, PriceError> {
    params.validate()?;
    let mut prices = Vec::with_capacity(n_periods);
    let mut p = params.initial.unwrap_or(params.mean);
    for _ in 0..n_periods {
        prices.push(p);
        let eps: f64 = rng.sample(StandardNormal);
        p = (p + params.reversion * (params.mean - p) + params.noise_std * eps).max(0.0);
    }
    for &(period, price) in &params.low_price_events {
        if let Some(slot) = prices.get_mut(period) {
            *slot = price;
        }
    }
    PriceSeries::new(period_length, prices)
}

/// [`generate_price_series`] on the market stream of `seed`.
pub fn generate_seeded(
    params: &PriceProcessParams,
    period_length: u64,
    n_periods: usize,
    seed: u64,
) -> Result<PriceSeries, PriceError> {
    let mut rng = rng::stream(seed, Domain::Market, 0, 0);
    generate_price_series(params, period_length, n_periods, &mut rng)
}

/// Linear demand feedback on top of the exogenous price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feedback {
    pub slope: f64,
    pub baseline_share: f64,
}

/// Exogenous price shifted by `slope` per unit of flexible demand share
/// above the baseline, clamped at zero.
pub fn price_with_feedback(exogenous_price: f64, demand_share: f64, feedback: &Feedback) -> f64 {
    (exogenous_price + feedback.slope * (demand_share - feedback.baseline_share)).max(0.0)
}

/// Reads one price per line. A leading `price` header is optional.
pub fn load_price_series<R: Read>(source: R, period_length: u64) -> Result<PriceSeries, PriceError> {
    if period_length == 0 {
        return Err(PriceError::PeriodLength);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut prices = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.len() != 1 {
            return Err(PriceError::Columns {
                line,
                found: record.len(),
            });
        }
        let text = &record[0];
        match text.parse::<f64>() {
            Ok(value) if value.is_finite() && value >= 0.0 => prices.push(value),
            Ok(value) => return Err(PriceError::Invalid { line, value }),
            Err(_) if idx == 0 && text.eq_ignore_ascii_case("price") => {}
            Err(_) => {
                return Err(PriceError::Parse {
                    line,
                    text: text.to_string(),
                })
            }
        }
    }
    if prices.is_empty() {
        return Err(PriceError::Empty);
    }
    PriceSeries::new(period_length, prices)
}

pub fn write_price_series<W: Write>(series: &PriceSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "price")?;
    for &p in &series.prices {
        writeln!(out, "{}", fmt_sig(p))?;
    }
    Ok(())
}
