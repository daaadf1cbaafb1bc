//! The discrete-time simulation loop.
//!
//! Each tick runs in a fixed order:
//!
//! 1. read the signals of the previous tick (relative bus voltage) and the
//!    price of the current market period,
//! 2. step every agent on those frozen signals,
//! 3. let the coordinator filter switch-on requests,
//! 4. commit the load set,
//! 5. solve the bus voltage,
//! 6. append a trace row.
//!
//! Because agents only see the previous tick, they can be stepped in any
//! order; every agent draws from its own `(seed, agent, tick)` stream.

mod config;
mod coordinator;

pub use config::{
    AgentKind, AgentsSection, ConfigError, CoordinatorMode, CoordinatorSection, MarketSection, MarketSpec, PerAgent,
    PolicySection, Population, PriceEvent, PriceSource, RunSection, Scenario, ScenarioConfig, SourceSection, SWEEPABLE,
};
pub use coordinator::Coordinator;

use rand::Rng;
use thiserror::Error;

use crate::circuit::{solve_bus_voltage, LoadSet, SourceModel};
use crate::devices::{FridgeAgent, FridgePolicy, StepFlags, Transition, WasherAgent, WasherPolicy};
use crate::market::{self, price_with_feedback, Feedback, PriceError, PriceSeries};
use crate::rng::{agent_init_stream, agent_stream};
use crate::trace::{SimTrace, TraceRow};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("price series: {0}")]
    Price(#[from] PriceError),
    #[error("cannot read price file {path}: {source}")]
    PriceFile {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("price series covers {covered} ticks but the run needs {needed}")]
    PriceCoverage { covered: u64, needed: u64 },
}

#[derive(Debug, Clone)]
enum Pool {
    Fridges {
        agents: Vec<FridgeAgent>,
        policy: FridgePolicy,
    },
    Washers {
        agents: Vec<WasherAgent>,
        policy: WasherPolicy,
    },
}

enum Step {
    Fridge(Transition<FridgeAgent>),
    Washer(Transition<WasherAgent>),
}

impl Step {
    fn is_activation(&self) -> bool {
        match self {
            Step::Fridge(t) => t.is_activation(),
            Step::Washer(t) => t.is_activation(),
        }
    }

    fn flags(&self) -> StepFlags {
        match self {
            Step::Fridge(t) => t.flags,
            Step::Washer(t) => t.flags,
        }
    }
}

#[derive(Debug, Clone)]
struct MarketState {
    series: PriceSeries,
    feedback: Option<Feedback>,
    /// Sum of flexible loads on over the ticks of the current period.
    on_ticks: u64,
    period: usize,
    prev_share: Option<f64>,
}

impl MarketState {
    fn price(&mut self, tick: u64, n_agents: usize) -> f64 {
        let period = self.series.period_of(tick);
        if period != self.period {
            let len = self.series.period_length() as f64;
            self.prev_share = (n_agents > 0).then(|| self.on_ticks as f64 / (len * n_agents as f64));
            self.on_ticks = 0;
            self.period = period;
        }
        let exogenous = self.series.price_at(tick).expect("coverage checked at construction");
        match (&self.feedback, self.prev_share) {
            (Some(fb), Some(share)) => price_with_feedback(exogenous, share, fb),
            _ => exogenous,
        }
    }
}

/// A running simulation. Construct with [`Simulation::new`], advance with
/// [`Simulation::step`] or finish with [`Simulation::run_to_end`].
#[derive(Debug, Clone)]
pub struct Simulation {
    seed: u64,
    n_ticks: u64,
    source: SourceModel,
    loads: LoadSet,
    pool: Pool,
    coordinator: Coordinator,
    market: Option<MarketState>,
    tick: u64,
    last_rel: f64,
    trace: SimTrace,
}

fn load_prices(spec: &MarketSpec, seed: u64, n_ticks: u64) -> Result<PriceSeries, EngineError> {
    let series = match &spec.source {
        PriceSource::Generated(params) => {
            let n_periods = n_ticks.div_ceil(spec.period_length).max(1) as usize;
            market::generate_seeded(params, spec.period_length, n_periods, seed)?
        }
        PriceSource::File(path) => {
            let file = std::fs::File::open(path).map_err(|source| EngineError::PriceFile {
                path: path.clone(),
                source,
            })?;
            market::load_price_series(std::io::BufReader::new(file), spec.period_length)?
        }
    };
    if series.n_ticks() < n_ticks {
        return Err(EngineError::PriceCoverage {
            covered: series.n_ticks(),
            needed: n_ticks,
        });
    }
    Ok(series)
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self, EngineError> {
        Self::with_prices(scenario, None)
    }

    /// Like [`Simulation::new`] but with an explicit exogenous price series
    /// for washer scenarios, bypassing the configured market source.
    pub fn with_prices(scenario: &Scenario, prices: Option<PriceSeries>) -> Result<Self, EngineError> {
        let seed = scenario.seed;
        let n = scenario.n_agents();
        let mut loads = LoadSet::from_ohms(&scenario.r_base, &scenario.r_flexible)
            .map_err(|e| ConfigError::invalid("agents", e.to_string()))?;
        let (pool, market) = match &scenario.population {
            Population::Fridges { cycle, policy } => {
                let agents = (0..n)
                    .map(|id| {
                        let phase = agent_init_stream(seed, id).random_range(0..cycle.period());
                        FridgeAgent::new(id, *cycle, phase).expect("phase drawn within cycle")
                    })
                    .collect();
                (
                    Pool::Fridges {
                        agents,
                        policy: *policy,
                    },
                    None,
                )
            }
            Population::Washers {
                jobs,
                reference_range: (lo, hi),
                policy,
                market,
            } => {
                let agents = (0..n)
                    .map(|id| {
                        let mut rng = agent_init_stream(seed, id);
                        let reference = if lo < hi { rng.random_range(*lo..*hi) } else { *lo };
                        let offset = rng.random_range(0..jobs.job_interval());
                        WasherAgent::with_offset(id, *jobs, reference, offset)
                            .map_err(|e| ConfigError::invalid("agents.reference_min", e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let series = match prices {
                    Some(series) => series,
                    None => load_prices(market, seed, scenario.n_ticks)?,
                };
                if series.n_ticks() < scenario.n_ticks {
                    return Err(EngineError::PriceCoverage {
                        covered: series.n_ticks(),
                        needed: scenario.n_ticks,
                    });
                }
                let market = MarketState {
                    series,
                    feedback: market.feedback,
                    on_ticks: 0,
                    period: 0,
                    prev_share: None,
                };
                (
                    Pool::Washers {
                        agents,
                        policy: *policy,
                    },
                    Some(market),
                )
            }
        };
        match &pool {
            Pool::Fridges { agents, .. } => {
                for a in agents {
                    loads.set_flexible(a.id(), a.is_on());
                }
            }
            Pool::Washers { agents, .. } => {
                for a in agents {
                    loads.set_flexible(a.id(), a.is_on());
                }
            }
        }
        let source = scenario.source.clone();
        let last_rel = solve_bus_voltage(&source, 0, &loads) / source.v_nominal();
        Ok(Self {
            seed,
            n_ticks: scenario.n_ticks,
            source,
            loads,
            pool,
            coordinator: Coordinator::new(scenario.coordinator, scenario.permits_per_tick),
            market,
            tick: 0,
            last_rel,
            trace: SimTrace::new(n),
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.n_ticks
    }

    pub fn loads(&self) -> &LoadSet {
        &self.loads
    }

    pub fn source(&self) -> &SourceModel {
        &self.source
    }

    pub fn trace(&self) -> &SimTrace {
        &self.trace
    }

    pub fn n_agents(&self) -> usize {
        self.loads.len()
    }

    pub fn fridges(&self) -> Option<&[FridgeAgent]> {
        match &self.pool {
            Pool::Fridges { agents, .. } => Some(agents),
            Pool::Washers { .. } => None,
        }
    }

    pub fn washers(&self) -> Option<&[WasherAgent]> {
        match &self.pool {
            Pool::Washers { agents, .. } => Some(agents),
            Pool::Fridges { .. } => None,
        }
    }

    /// Advances one tick, evaluating agents in id order.
    pub fn step(&mut self) {
        let order: Vec<usize> = (0..self.n_agents()).collect();
        self.step_in_order(&order);
    }

    /// Advances one tick, evaluating agents in the given order. The result
    /// does not depend on the order; `order` must be a permutation of the
    /// agent ids.
    pub fn step_in_order(&mut self, order: &[usize]) {
        let t = self.tick;
        let n = self.n_agents();
        let rel_prev = self.last_rel;
        let price = self.market.as_mut().map(|m| m.price(t, n));
        let seed = self.seed;

        let mut steps: Vec<Option<Step>> = (0..n).map(|_| None).collect();
        for &id in order {
            let mut rng = agent_stream(seed, id, t);
            let step = match &self.pool {
                Pool::Fridges { agents, policy } => Step::Fridge(agents[id].step(policy, rel_prev, &mut rng)),
                Pool::Washers { agents, policy } => Step::Washer(agents[id].step(
                    policy,
                    price.expect("washer runs carry a market"),
                    rel_prev,
                    t,
                    &mut rng,
                )),
            };
            steps[id] = Some(step);
        }
        let steps: Vec<Step> = steps
            .into_iter()
            .map(|s| s.expect("order must cover every agent"))
            .collect();

        let requests: Vec<usize> = (0..n).filter(|&i| steps[i].is_activation()).collect();
        let granted = self.coordinator.filter(&requests);
        let mut is_granted = vec![false; n];
        for &id in &granted {
            is_granted[id] = true;
        }

        let mut n_vetoed = 0;
        let mut n_forced = 0;
        let mut n_postponed = 0;
        for (id, step) in steps.into_iter().enumerate() {
            let flags = step.flags();
            let activation = step.is_activation();
            let ok = !activation || is_granted[id];
            n_vetoed += flags.vetoed as usize;
            n_forced += (flags.forced && activation && ok) as usize;
            match (step, &mut self.pool) {
                (Step::Fridge(tr), Pool::Fridges { agents, .. }) => {
                    let next = tr.commit(ok);
                    n_postponed += (next.mode() == crate::devices::FridgeMode::Postponed) as usize;
                    self.loads.set_flexible(id, next.is_on());
                    agents[id] = next;
                }
                (Step::Washer(tr), Pool::Washers { agents, .. }) => {
                    n_postponed += (flags.withheld || !ok) as usize;
                    let next = tr.commit(ok);
                    self.loads.set_flexible(id, next.is_on());
                    agents[id] = next;
                }
                _ => unreachable!("step kind matches pool"),
            }
        }

        let bus_voltage = solve_bus_voltage(&self.source, t, &self.loads);
        let rel_voltage = bus_voltage / self.source.v_nominal();
        let n_flexible_on = self.loads.count_on();
        if let Some(m) = self.market.as_mut() {
            m.on_ticks += n_flexible_on as u64;
        }
        if let Pool::Washers { agents, .. } = &self.pool {
            let (lo, hi) = agents.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                (lo.min(a.reference_price()), hi.max(a.reference_price()))
            });
            self.trace
                .expectation_spread
                .push(if agents.is_empty() { 0.0 } else { hi - lo });
        }
        self.trace.rows.push(TraceRow {
            tick: t,
            bus_voltage,
            rel_voltage,
            n_flexible_on,
            price,
            n_postponed,
            n_vetoed,
            n_forced,
        });
        self.last_rel = rel_voltage;
        self.tick += 1;
    }

    pub fn run_to_end(mut self) -> SimTrace {
        while !self.is_finished() {
            self.step();
        }
        self.trace
    }
}

/// Validates `config` and runs it to completion.
pub fn run(config: &ScenarioConfig) -> Result<SimTrace, EngineError> {
    let scenario = config.validate()?;
    run_scenario(&scenario)
}

pub fn run_scenario(scenario: &Scenario) -> Result<SimTrace, EngineError> {
    Ok(Simulation::new(scenario)?.run_to_end())
}

/// Source voltage in effect at `tick`.
pub fn apply_disturbance(source: &SourceModel, tick: u64) -> f64 {
    source.v_source_at(tick)
}
