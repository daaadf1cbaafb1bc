//! Single-bus DC circuit: an ideal source behind a series resistance feeding
//! a bank of parallel resistive loads.
//!
//! Every agent contributes an always-connected base load and a switchable
//! flexible load. The bus voltage is the voltage divider between the source
//! resistance and the parallel load block, which reduces to
//! `v_source / (1 + r_source * G)` where `G` is the total load conductance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{field} must be finite and strictly positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("{field} must be finite and non-negative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("disturbance ticks must be strictly increasing ({prev} then {next})")]
    UnorderedDisturbance { prev: u64, next: u64 },
    #[error("load lists disagree on agent count: {base} base, {flexible} flexible")]
    LengthMismatch { base: usize, flexible: usize },
}

/// A scheduled step change of the source voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub tick: u64,
    pub v_source: f64,
}

/// Voltage source with series resistance and a stepwise disturbance schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    v_source: f64,
    r_source: f64,
    v_nominal: f64,
    disturbances: Vec<Disturbance>,
}

fn positive(field: &'static str, value: f64) -> Result<f64, CircuitError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CircuitError::NotPositive { field, value })
    }
}

impl SourceModel {
    pub fn new(
        v_source: f64,
        r_source: f64,
        v_nominal: f64,
        disturbances: Vec<Disturbance>,
    ) -> Result<Self, CircuitError> {
        positive("v_source", v_source)?;
        positive("r_source", r_source)?;
        positive("v_nominal", v_nominal)?;
        for d in &disturbances {
            positive("disturbances.v_source", d.v_source)?;
        }
        for pair in disturbances.windows(2) {
            if pair[1].tick <= pair[0].tick {
                return Err(CircuitError::UnorderedDisturbance {
                    prev: pair[0].tick,
                    next: pair[1].tick,
                });
            }
        }
        Ok(Self {
            v_source,
            r_source,
            v_nominal,
            disturbances,
        })
    }

    pub fn v_source(&self) -> f64 {
        self.v_source
    }

    pub fn r_source(&self) -> f64 {
        self.r_source
    }

    pub fn v_nominal(&self) -> f64 {
        self.v_nominal
    }

    pub fn disturbances(&self) -> &[Disturbance] {
        &self.disturbances
    }

    /// Source voltage in effect at `tick`: the value of the last disturbance
    /// scheduled at or before `tick`, or the undisturbed value.
    pub fn v_source_at(&self, tick: u64) -> f64 {
        let idx = self.disturbances.partition_point(|d| d.tick <= tick);
        match idx {
            0 => self.v_source,
            i => self.disturbances[i - 1].v_source,
        }
    }
}

/// Per-agent base and flexible conductances plus the flexible switch states.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSet {
    base: Vec<f64>,
    flexible: Vec<f64>,
    flexible_on: Vec<bool>,
}

impl LoadSet {
    /// Builds a load set with every flexible load switched off.
    pub fn new(base: Vec<f64>, flexible: Vec<f64>) -> Result<Self, CircuitError> {
        if base.len() != flexible.len() {
            return Err(CircuitError::LengthMismatch {
                base: base.len(),
                flexible: flexible.len(),
            });
        }
        for &g in &base {
            if !(g.is_finite() && g >= 0.0) {
                return Err(CircuitError::Negative {
                    field: "base conductance",
                    value: g,
                });
            }
        }
        for &g in &flexible {
            if !(g.is_finite() && g >= 0.0) {
                return Err(CircuitError::Negative {
                    field: "flexible conductance",
                    value: g,
                });
            }
        }
        let flexible_on = vec![false; base.len()];
        Ok(Self {
            base,
            flexible,
            flexible_on,
        })
    }

    /// Builds a load set from resistances in ohms. An infinite resistance is
    /// an open circuit.
    pub fn from_ohms(base: &[f64], flexible: &[f64]) -> Result<Self, CircuitError> {
        let to_siemens = |field: &'static str, r: f64| {
            if r.is_nan() || r <= 0.0 {
                Err(CircuitError::NotPositive { field, value: r })
            } else {
                Ok(1.0 / r)
            }
        };
        let base = base
            .iter()
            .map(|&r| to_siemens("r_base", r))
            .collect::<Result<Vec<_>, _>>()?;
        let flexible = flexible
            .iter()
            .map(|&r| to_siemens("r_flexible", r))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(base, flexible)
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn base_conductances(&self) -> &[f64] {
        &self.base
    }

    pub fn flexible_conductances(&self) -> &[f64] {
        &self.flexible
    }

    pub fn flexible_on(&self) -> &[bool] {
        &self.flexible_on
    }

    pub fn set_flexible(&mut self, agent: usize, on: bool) {
        self.flexible_on[agent] = on;
    }

    pub fn count_on(&self) -> usize {
        self.flexible_on.iter().filter(|&&on| on).count()
    }
}

/// Sum of all connected conductances.
pub fn total_conductance(loads: &LoadSet) -> f64 {
    let base: f64 = loads.base.iter().sum();
    let flexible: f64 = loads
        .flexible
        .iter()
        .zip(&loads.flexible_on)
        .filter(|(_, &on)| on)
        .map(|(g, _)| g)
        .sum();
    base + flexible
}

/// Bus voltage for a source of `v_source` volts behind `r_source` ohms.
pub fn bus_voltage(v_source: f64, r_source: f64, conductance: f64) -> f64 {
    if conductance == 0.0 {
        return v_source;
    }
    v_source / (1.0 + r_source * conductance)
}

/// Bus voltage at `tick`, with the disturbance schedule applied.
pub fn solve_bus_voltage(source: &SourceModel, tick: u64, loads: &LoadSet) -> f64 {
    bus_voltage(source.v_source_at(tick), source.r_source, total_conductance(loads))
}
