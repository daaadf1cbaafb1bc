//! Scenario configuration files.
//!
//! A scenario is a TOML document with the sections `run`, `source`,
//! `agents`, `policy`, `coordinator` and (washer scenarios only) `market`.
//! Unknown keys are rejected. [`ScenarioConfig::validate`] turns the raw
//! document into a [`Scenario`]; [`Scenario::to_config`] renders it back with
//! every default spelled out, which is what `resolved.config` contains.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{CircuitError, Disturbance, SourceModel};
use crate::devices::{DeviceError, FridgeCycle, FridgePolicy, WasherJobs, WasherPolicy};
use crate::market::{Feedback, PriceProcessParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot render scenario: {0}")]
    Render(#[from] toml::ser::Error),
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// The offending field for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

fn device_error(section: &str, err: DeviceError) -> ConfigError {
    let DeviceError::OutOfRange { field, .. } = &err;
    ConfigError::invalid(format!("{section}.{field}"), err.to_string())
}

fn circuit_error(err: CircuitError) -> ConfigError {
    let field = match &err {
        CircuitError::NotPositive { field, .. } | CircuitError::Negative { field, .. } => {
            format!("source.{field}")
        }
        CircuitError::UnorderedDisturbance { .. } => "source.disturbances".to_string(),
        CircuitError::LengthMismatch { .. } => "agents.r_flexible".to_string(),
    };
    ConfigError::invalid(field, err.to_string())
}

/// A scalar applied to every agent or one value per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAgent {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerAgent {
    fn expand(&self, field: &str, count: usize) -> Result<Vec<f64>, ConfigError> {
        let values = match self {
            Self::Scalar(v) => vec![*v; count],
            Self::List(vs) if vs.len() == count => vs.clone(),
            Self::List(vs) => {
                return Err(ConfigError::invalid(
                    field,
                    format!("expected {count} values, found {}", vs.len()),
                ))
            }
        };
        if let Some(bad) = values.iter().find(|r| r.is_nan() || **r <= 0.0) {
            return Err(ConfigError::invalid(
                field,
                format!("resistances must be positive (inf = open), got {bad}"),
            ));
        }
        Ok(values)
    }

    fn compact(values: &[f64]) -> Self {
        match values.first() {
            Some(&first) if values.iter().all(|&v| v == first) => Self::Scalar(first),
            None => Self::Scalar(f64::INFINITY),
            _ => Self::List(values.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub n_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub v_source: f64,
    pub r_source: f64,
    pub v_nominal: f64,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Fridge,
    Washer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub kind: AgentKind,
    pub count: usize,
    /// Base load resistance in ohms.
    pub r_base: PerAgent,
    /// Flexible load resistance in ohms.
    pub r_flexible: PerAgent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_duration: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub off_duration: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_postpone: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_length: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_interval: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reactive: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume_wait_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ewma_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bargain_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_check: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_limit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinatorMode {
    /// Agents act on their triggers directly.
    None,
    /// Triggers pass a per-agent Bernoulli gate; resumes wait a random delay.
    Randomized,
    /// Every switch-on needs one of a bounded number of permits per tick.
    TimeDivision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinatorSection {
    pub mode: CoordinatorMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permits_per_tick: Option<usize>,
}

/// A constant price over the market periods `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceEvent {
    pub start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub period_length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<PriceEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
}

/// The raw scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunSection,
    pub source: SourceSection,
    pub agents: AgentsSection,
    #[serde(default)]
    pub policy: PolicySection,
    pub coordinator: CoordinatorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriceSource {
    Generated(PriceProcessParams),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSpec {
    pub period_length: u64,
    pub source: PriceSource,
    pub feedback: Option<Feedback>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    Fridges {
        cycle: FridgeCycle,
        policy: FridgePolicy,
    },
    Washers {
        jobs: WasherJobs,
        reference_range: (f64, f64),
        policy: WasherPolicy,
        market: MarketSpec,
    },
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub n_ticks: u64,
    pub source: SourceModel,
    pub r_base: Vec<f64>,
    pub r_flexible: Vec<f64>,
    pub population: Population,
    pub coordinator: CoordinatorMode,
    pub permits_per_tick: usize,
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.r_base.len()
    }

    pub fn kind(&self) -> AgentKind {
        match self.population {
            Population::Fridges { .. } => AgentKind::Fridge,
            Population::Washers { .. } => AgentKind::Washer,
        }
    }
}

pub const DEFAULT_ON_DURATION: u32 = 20;
pub const DEFAULT_OFF_DURATION: u32 = 40;
pub const DEFAULT_JOB_LENGTH: u64 = 120;
pub const DEFAULT_JOB_INTERVAL: u64 = 1440;
pub const DEFAULT_EWMA_LAMBDA: f64 = 0.02;
pub const DEFAULT_BARGAIN_FACTOR: f64 = 0.8;
pub const DEFAULT_VOLTAGE_LIMIT: f64 = 0.95;

/// Parameters a sweep may vary.
pub const SWEEPABLE: &[&str] = &[
    "seed",
    "act_probability",
    "resume_wait_max",
    "threshold_low",
    "threshold_high",
    "permits_per_tick",
    "bargain_factor",
    "ewma_lambda",
    "voltage_limit",
];

fn reject_unused(kind: &str, fields: &[(&str, bool)]) -> Result<(), ConfigError> {
    match fields.iter().find(|(_, present)| *present) {
        Some((name, _)) => Err(ConfigError::invalid(
            *name,
            format!("not applicable to {kind} scenarios"),
        )),
        None => Ok(()),
    }
}

fn as_integer(name: &str, value: f64) -> Result<u64, ConfigError> {
    if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as u64)
    } else {
        Err(ConfigError::invalid(
            name,
            format!("expected a non-negative integer, got {value}"),
        ))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a scenario file. A relative `market.price_file` is resolved
    /// against the directory containing the scenario.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text)?;
        if let Some(file) = config.market.as_mut().and_then(|m| m.price_file.as_mut()) {
            if file.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                *file = base.join(&*file);
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Overrides one sweepable scalar.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let p = &mut self.policy;
        match name {
            "seed" => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= i64::MAX as f64) {
                    return Err(ConfigError::invalid("run.seed", format!("not a valid seed: {value}")));
                }
                self.run.seed = value as u64;
            }
            "act_probability" => p.act_probability = Some(value),
            "resume_wait_max" => p.resume_wait_max = Some(as_integer("policy.resume_wait_max", value)? as u32),
            "threshold_low" => p.threshold_low = Some(value),
            "threshold_high" => p.threshold_high = Some(value),
            "bargain_factor" => p.bargain_factor = Some(value),
            "ewma_lambda" => p.ewma_lambda = Some(value),
            "voltage_limit" => p.voltage_limit = Some(value),
            "permits_per_tick" => {
                self.coordinator.permits_per_tick = Some(as_integer("coordinator.permits_per_tick", value)? as usize)
            }
            other => {
                return Err(ConfigError::invalid(
                    other,
                    format!("not a sweepable parameter (expected one of {})", SWEEPABLE.join(", ")),
                ))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<Scenario, ConfigError> {
        if self.run.seed > i64::MAX as u64 {
            return Err(ConfigError::invalid("run.seed", "must not exceed 2^63 - 1"));
        }
        let s = &self.source;
        let source =
            SourceModel::new(s.v_source, s.r_source, s.v_nominal, s.disturbances.clone()).map_err(circuit_error)?;

        let a = &self.agents;
        let r_base = a.r_base.expand("agents.r_base", a.count)?;
        let r_flexible = a.r_flexible.expand("agents.r_flexible", a.count)?;

        let p = &self.policy;
        let c = &self.coordinator;
        let act_probability = p.act_probability.unwrap_or(1.0);
        let resume_wait_max = p.resume_wait_max.unwrap_or(0);
        if c.mode != CoordinatorMode::Randomized {
            if act_probability != 1.0 {
                return Err(ConfigError::invalid(
                    "policy.act_probability",
                    "only meaningful with coordinator.mode = \"randomized\"",
                ));
            }
            if resume_wait_max != 0 {
                return Err(ConfigError::invalid(
                    "policy.resume_wait_max",
                    "only meaningful with coordinator.mode = \"randomized\"",
                ));
            }
        }
        let permits_per_tick = match (c.mode, c.permits_per_tick) {
            (CoordinatorMode::TimeDivision, Some(0)) => {
                return Err(ConfigError::invalid(
                    "coordinator.permits_per_tick",
                    "must be at least 1",
                ))
            }
            (CoordinatorMode::TimeDivision, Some(k)) => k,
            (CoordinatorMode::TimeDivision, None) => {
                return Err(ConfigError::invalid(
                    "coordinator.permits_per_tick",
                    "required for time_division",
                ))
            }
            (_, Some(_)) => {
                return Err(ConfigError::invalid(
                    "coordinator.permits_per_tick",
                    "only used by time_division",
                ))
            }
            (_, None) => 0,
        };

        let population = match a.kind {
            AgentKind::Fridge => {
                reject_unused(
                    "fridge",
                    &[
                        ("agents.job_length", a.job_length.is_some()),
                        ("agents.job_interval", a.job_interval.is_some()),
                        ("agents.reference_min", a.reference_min.is_some()),
                        ("agents.reference_max", a.reference_max.is_some()),
                        ("policy.ewma_lambda", p.ewma_lambda.is_some()),
                        ("policy.bargain_factor", p.bargain_factor.is_some()),
                        ("policy.voltage_check", p.voltage_check.is_some()),
                        ("policy.voltage_limit", p.voltage_limit.is_some()),
                        ("market", self.market.is_some()),
                    ],
                )?;
                let off = a.off_duration.unwrap_or(DEFAULT_OFF_DURATION);
                let cycle = FridgeCycle::new(
                    a.on_duration.unwrap_or(DEFAULT_ON_DURATION),
                    off,
                    a.max_postpone.unwrap_or(3 * off),
                )
                .map_err(|e| device_error("agents", e))?;
                let policy = FridgePolicy {
                    reactive: p.reactive.unwrap_or(true),
                    threshold_low: p.threshold_low.unwrap_or(0.98),
                    threshold_high: p.threshold_high.unwrap_or(1.02),
                    act_probability,
                    resume_wait_max,
                };
                policy.validate().map_err(|e| device_error("policy", e))?;
                Population::Fridges { cycle, policy }
            }
            AgentKind::Washer => {
                reject_unused(
                    "washer",
                    &[
                        ("agents.on_duration", a.on_duration.is_some()),
                        ("agents.off_duration", a.off_duration.is_some()),
                        ("agents.max_postpone", a.max_postpone.is_some()),
                        ("policy.reactive", p.reactive.is_some()),
                        ("policy.threshold_low", p.threshold_low.is_some()),
                        ("policy.threshold_high", p.threshold_high.is_some()),
                        ("policy.resume_wait_max", p.resume_wait_max.is_some()),
                    ],
                )?;
                let jobs = WasherJobs::new(
                    a.job_length.unwrap_or(DEFAULT_JOB_LENGTH),
                    a.job_interval.unwrap_or(DEFAULT_JOB_INTERVAL),
                )
                .map_err(|e| device_error("agents", e))?;
                let policy = WasherPolicy {
                    ewma_lambda: p.ewma_lambda.unwrap_or(DEFAULT_EWMA_LAMBDA),
                    bargain_factor: p.bargain_factor.unwrap_or(DEFAULT_BARGAIN_FACTOR),
                    voltage_check_enabled: p.voltage_check.unwrap_or(false),
                    voltage_limit: p.voltage_limit.unwrap_or(DEFAULT_VOLTAGE_LIMIT),
                    act_probability,
                };
                policy.validate().map_err(|e| device_error("policy", e))?;
                let market = self
                    .market
                    .as_ref()
                    .ok_or_else(|| ConfigError::invalid("market", "washer scenarios need a market section"))?;
                let market = market.validate()?;
                let lo = a.reference_min.unwrap_or(0.5 * market.typical_price());
                let hi = a.reference_max.unwrap_or(1.5 * market.typical_price());
                if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                    return Err(ConfigError::invalid(
                        "agents.reference_min",
                        format!("need 0 < reference_min <= reference_max, got [{lo}, {hi}]"),
                    ));
                }
                Population::Washers {
                    jobs,
                    reference_range: (lo, hi),
                    policy,
                    market,
                }
            }
        };

        Ok(Scenario {
            seed: self.run.seed,
            n_ticks: self.run.n_ticks,
            source,
            r_base,
            r_flexible,
            population,
            coordinator: c.mode,
            permits_per_tick,
        })
    }
}

impl MarketSection {
    fn validate(&self) -> Result<MarketSpec, ConfigError> {
        if self.period_length == 0 {
            return Err(ConfigError::invalid("market.period_length", "must be at least 1"));
        }
        if let Some(fb) = &self.feedback {
            if !(fb.slope.is_finite() && (0.0..=1.0).contains(&fb.baseline_share)) {
                return Err(ConfigError::invalid(
                    "market.feedback",
                    "slope must be finite and baseline_share within [0, 1]",
                ));
            }
        }
        let generator_keys = [
            ("market.mean", self.mean.is_some()),
            ("market.reversion", self.reversion.is_some()),
            ("market.noise_std", self.noise_std.is_some()),
            ("market.initial", self.initial.is_some()),
            ("market.events", !self.events.is_empty()),
        ];
        let source = match &self.price_file {
            Some(path) => {
                reject_unused("price-file", &generator_keys)?;
                PriceSource::File(path.clone())
            }
            None => {
                let mean = self
                    .mean
                    .ok_or_else(|| ConfigError::invalid("market.mean", "required unless price_file is given"))?;
                let mut low_price_events = Vec::new();
                for ev in &self.events {
                    let end = ev.end.unwrap_or(ev.start + 1);
                    if end <= ev.start {
                        return Err(ConfigError::invalid("market.events", "end must exceed start"));
                    }
                    low_price_events.extend((ev.start..end).map(|k| (k, ev.price)));
                }
                let params = PriceProcessParams {
                    mean,
                    reversion: self.reversion.unwrap_or(0.2),
                    noise_std: self.noise_std.unwrap_or(0.0),
                    initial: self.initial,
                    low_price_events,
                };
                params.validate().map_err(|e| {
                    let field = match &e {
                        crate::market::PriceError::Param { field, .. } => format!("market.{field}"),
                        _ => "market".to_string(),
                    };
                    ConfigError::invalid(field, e.to_string())
                })?;
                PriceSource::Generated(params)
            }
        };
        Ok(MarketSpec {
            period_length: self.period_length,
            source,
            feedback: self.feedback,
        })
    }
}

impl MarketSpec {
    fn typical_price(&self) -> f64 {
        match &self.source {
            PriceSource::Generated(p) => p.mean,
            PriceSource::File(_) => 40.0,
        }
    }
}

impl Scenario {
    /// The scenario as a document with every default made explicit.
    pub fn to_config(&self) -> ScenarioConfig {
        let source = SourceSection {
            v_source: self.source.v_source(),
            r_source: self.source.r_source(),
            v_nominal: self.source.v_nominal(),
            disturbances: self.source.disturbances().to_vec(),
        };
        let mut agents = AgentsSection {
            kind: self.kind(),
            count: self.n_agents(),
            r_base: PerAgent::compact(&self.r_base),
            r_flexible: PerAgent::compact(&self.r_flexible),
            on_duration: None,
            off_duration: None,
            max_postpone: None,
            job_length: None,
            job_interval: None,
            reference_min: None,
            reference_max: None,
        };
        let randomized = self.coordinator == CoordinatorMode::Randomized;
        let mut policy = PolicySection::default();
        let mut market = None;
        match &self.population {
            Population::Fridges { cycle, policy: fp } => {
                agents.on_duration = Some(cycle.on_duration());
                agents.off_duration = Some(cycle.off_duration());
                agents.max_postpone = Some(cycle.max_postpone());
                policy.reactive = Some(fp.reactive);
                policy.threshold_low = Some(fp.threshold_low);
                policy.threshold_high = Some(fp.threshold_high);
                if randomized {
                    policy.act_probability = Some(fp.act_probability);
                    policy.resume_wait_max = Some(fp.resume_wait_max);
                }
            }
            Population::Washers {
                jobs,
                reference_range,
                policy: wp,
                market: spec,
            } => {
                agents.job_length = Some(jobs.job_length());
                agents.job_interval = Some(jobs.job_interval());
                agents.reference_min = Some(reference_range.0);
                agents.reference_max = Some(reference_range.1);
                policy.ewma_lambda = Some(wp.ewma_lambda);
                policy.bargain_factor = Some(wp.bargain_factor);
                policy.voltage_check = Some(wp.voltage_check_enabled);
                policy.voltage_limit = Some(wp.voltage_limit);
                if randomized {
                    policy.act_probability = Some(wp.act_probability);
                }
                let mut section = MarketSection {
                    period_length: spec.period_length,
                    price_file: None,
                    mean: None,
                    reversion: None,
                    noise_std: None,
                    initial: None,
                    events: Vec::new(),
                    feedback: spec.feedback,
                };
                match &spec.source {
                    PriceSource::File(path) => {
                        section.price_file = Some(std::path::absolute(path).unwrap_or_else(|_| path.clone()));
                    }
                    PriceSource::Generated(params) => {
                        section.mean = Some(params.mean);
                        section.reversion = Some(params.reversion);
                        section.noise_std = Some(params.noise_std);
                        section.initial = params.initial;
                        section.events = params
                            .low_price_events
                            .iter()
                            .map(|&(start, price)| PriceEvent {
                                start,
                                end: None,
                                price,
                            })
                            .collect();
                    }
                }
                market = Some(section);
            }
        }
        ScenarioConfig {
            run: RunSection {
                seed: self.seed,
                n_ticks: self.n_ticks,
            },
            source,
            agents,
            policy,
            coordinator: CoordinatorSection {
                mode: self.coordinator,
                permits_per_tick: (self.coordinator == CoordinatorMode::TimeDivision).then_some(self.permits_per_tick),
            },
            market,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRIDGE: &str = r#"
[run]
seed = 7
n_ticks = 100

[source]
v_source = 230.0
r_source = 0.05
v_nominal = 213.0
disturbances = [{ tick = 50, v_source = 223.1 }]

[agents]
kind = "fridge"
count = 3
r_base = 200.0
r_flexible = [110.0, 115.0, 120.0]

[policy]
threshold_low = 0.98

[coordinator]
mode = "randomized"
"#;

    const WASHER: &str = r#"
[run]
seed = 1
n_ticks = 100

[source]
v_source = 230.0
r_source = 0.05
v_nominal = 220.0

[agents]
kind = "washer"
count = 2
r_base = 300.0
r_flexible = 60.0

[policy]
voltage_check = true

[coordinator]
mode = "none"

[market]
period_length = 10
mean = 40.0
noise_std = 2.0
events = [{ start = 2, end = 4, price = 70.0 }, { start = 5, price = 15.0 }]
"#;

    #[test]
    fn parses_and_validates_fridge_scenario() {
        let cfg = ScenarioConfig::from_toml_str(FRIDGE).unwrap();
        let sc = cfg.validate().unwrap();
        assert_eq!(sc.n_agents(), 3);
        assert_eq!(sc.r_flexible, vec![110.0, 115.0, 120.0]);
        match sc.population {
            Population::Fridges { cycle, policy } => {
                assert_eq!(cycle.max_postpone(), 3 * DEFAULT_OFF_DURATION);
                assert_eq!(policy.act_probability, 1.0);
            }
            _ => panic!("expected fridges"),
        }
    }

    #[test]
    fn expands_price_event_ranges() {
        let sc = ScenarioConfig::from_toml_str(WASHER).unwrap().validate().unwrap();
        let Population::Washers { market, policy, .. } = sc.population else {
            panic!("expected washers")
        };
        assert!(policy.voltage_check_enabled);
        let PriceSource::Generated(params) = market.source else {
            panic!("expected generator")
        };
        assert_eq!(params.low_price_events, vec![(2, 70.0), (3, 70.0), (5, 15.0)]);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = FRIDGE.replace("threshold_low = 0.98", "threshold_lo = 0.98");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("threshold_lo"), "{err}");
        let text = FRIDGE.replace("[coordinator]", "[bogus]\nx = 1\n[coordinator]");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let text = FRIDGE.replace("threshold_low = 0.98", "act_probability = 1.5");
        let err = ScenarioConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field(), Some("policy.act_probability"));
        assert!(err.to_string().contains("act_probability"));

        let text = FRIDGE.replace("r_source = 0.05", "r_source = 0.0");
        let err = ScenarioConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field(), Some("source.r_source"));

        let text = FRIDGE.replace("count = 3", "count = 4");
        let err = ScenarioConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field(), Some("agents.r_flexible"));

        let text = FRIDGE.replace("mode = \"randomized\"", "mode = \"time_division\"");
        let err = ScenarioConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field(), Some("coordinator.permits_per_tick"));
    }

    #[test]
    fn gate_parameters_need_randomized_mode() {
        let text = FRIDGE
            .replace("mode = \"randomized\"", "mode = \"none\"")
            .replace("threshold_low = 0.98", "act_probability = 0.5");
        let err = ScenarioConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field(), Some("policy.act_probability"));
    }

    #[test]
    fn kind_specific_keys_are_checked() {
        let text = FRIDGE.replace("threshold_low = 0.98", "bargain_factor = 0.9");
        let err = ScenarioConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field(), Some("policy.bargain_factor"));
        let text = WASHER.replace(
            "[market]\nperiod_length = 10\nmean = 40.0",
            "[market]\nperiod_length = 10",
        );
        let err = ScenarioConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field(), Some("market.mean"));
    }

    #[test]
    fn resolved_config_round_trips() {
        for text in [FRIDGE, WASHER] {
            let sc = ScenarioConfig::from_toml_str(text).unwrap().validate().unwrap();
            let rendered = sc.to_config().to_toml_string().unwrap();
            let again = ScenarioConfig::from_toml_str(&rendered).unwrap().validate().unwrap();
            assert_eq!(sc, again);
            assert_eq!(rendered, again.to_config().to_toml_string().unwrap());
        }
    }

    #[test]
    fn sweep_overrides() {
        let mut cfg = ScenarioConfig::from_toml_str(FRIDGE).unwrap();
        cfg.set_param("act_probability", 0.2).unwrap();
        cfg.set_param("seed", 99.0).unwrap();
        let sc = cfg.validate().unwrap();
        assert_eq!(sc.seed, 99);
        let Population::Fridges { policy, .. } = sc.population else {
            panic!()
        };
        assert_eq!(policy.act_probability, 0.2);
        assert!(cfg.set_param("warp_factor", 1.0).is_err());
        assert!(cfg.set_param("resume_wait_max", 1.5).is_err());
    }
}
