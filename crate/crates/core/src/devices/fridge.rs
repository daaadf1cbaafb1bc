use rand::Rng;

use super::{check, randomized_gate, DeviceError, StepFlags, Transition};

/// Cycle timing shared by a fridge population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FridgeCycle {
    on_duration: u32,
    off_duration: u32,
    max_postpone: u32,
}

impl FridgeCycle {
    pub fn new(on_duration: u32, off_duration: u32, max_postpone: u32) -> Result<Self, DeviceError> {
        check("on_duration", on_duration as f64, on_duration >= 1, ">= 1")?;
        check("off_duration", off_duration as f64, off_duration >= 1, ">= 1")?;
        check("max_postpone", max_postpone as f64, max_postpone >= 1, ">= 1")?;
        Ok(Self {
            on_duration,
            off_duration,
            max_postpone,
        })
    }

    pub fn on_duration(&self) -> u32 {
        self.on_duration
    }

    pub fn off_duration(&self) -> u32 {
        self.off_duration
    }

    pub fn max_postpone(&self) -> u32 {
        self.max_postpone
    }

    pub fn period(&self) -> u32 {
        self.on_duration + self.off_duration
    }

    /// Long-run fraction of time spent on when never postponed.
    pub fn duty(&self) -> f64 {
        self.on_duration as f64 / self.period() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FridgeMode {
    On,
    Off,
    /// A due activation is being held back.
    Postponed,
    /// Switched on because the postponement limit was reached.
    Forced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FridgePolicy {
    /// When false the fridge ignores the voltage and runs its plain cycle.
    pub reactive: bool,
    pub threshold_low: f64,
    pub threshold_high: f64,
    pub act_probability: f64,
    pub resume_wait_max: u32,
}

impl FridgePolicy {
    pub fn naive(threshold_low: f64, threshold_high: f64) -> Self {
        Self {
            reactive: true,
            threshold_low,
            threshold_high,
            act_probability: 1.0,
            resume_wait_max: 0,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let (low, high) = (self.threshold_low, self.threshold_high);
        check("threshold_low", low, low > 0.0 && low <= 1.0, "0 < threshold_low <= 1")?;
        check(
            "threshold_high",
            high,
            high >= 1.0 && high.is_finite(),
            "threshold_high >= 1",
        )?;
        let p = self.act_probability;
        check(
            "act_probability",
            p,
            (0.0..=1.0).contains(&p),
            "0 <= act_probability <= 1",
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FridgeAgent {
    id: usize,
    cycle: FridgeCycle,
    /// Ticks into the on/off cycle; the flexible load is on while
    /// `phase < on_duration`.
    phase: u32,
    mode: FridgeMode,
    postponed_for: u32,
    /// Remaining randomized resume delay, armed once the voltage recovers.
    resume_wait: Option<u32>,
}

impl FridgeAgent {
    pub fn new(id: usize, cycle: FridgeCycle, phase: u32) -> Result<Self, DeviceError> {
        check("phase", phase as f64, phase < cycle.period(), "phase < on + off")?;
        let mode = if phase < cycle.on_duration {
            FridgeMode::On
        } else {
            FridgeMode::Off
        };
        Ok(Self {
            id,
            cycle,
            phase,
            mode,
            postponed_for: 0,
            resume_wait: None,
        })
    }

    /// An agent that has already held back its activation for
    /// `postponed_for` ticks.
    pub fn postponed(id: usize, cycle: FridgeCycle, postponed_for: u32) -> Result<Self, DeviceError> {
        check(
            "postponed_for",
            postponed_for as f64,
            postponed_for <= cycle.max_postpone,
            "postponed_for <= max_postpone",
        )?;
        Ok(Self {
            id,
            cycle,
            phase: cycle.period() - 1,
            mode: FridgeMode::Postponed,
            postponed_for,
            resume_wait: None,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn cycle(&self) -> FridgeCycle {
        self.cycle
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn mode(&self) -> FridgeMode {
        self.mode
    }

    pub fn postponed_for(&self) -> u32 {
        self.postponed_for
    }

    pub fn resume_wait(&self) -> Option<u32> {
        self.resume_wait
    }

    pub fn is_on(&self) -> bool {
        matches!(self.mode, FridgeMode::On | FridgeMode::Forced)
    }

    fn activated(&self, mode: FridgeMode) -> Self {
        Self {
            phase: 0,
            mode,
            postponed_for: 0,
            resume_wait: None,
            ..self.clone()
        }
    }

    fn held(&self) -> Self {
        Self {
            phase: self.cycle.period() - 1,
            mode: FridgeMode::Postponed,
            postponed_for: (self.postponed_for + 1).min(self.cycle.max_postpone),
            ..self.clone()
        }
    }

    fn activation(&self, mode: FridgeMode, on_denied: Self) -> Transition<Self> {
        Transition {
            next: self.activated(mode),
            on_denied: Some(on_denied),
            flags: StepFlags {
                forced: mode == FridgeMode::Forced,
                ..StepFlags::default()
            },
        }
    }

    /// One tick of the cycle under `policy`, given the relative bus voltage
    /// sensed on the previous tick.
    pub fn step<R: Rng + ?Sized>(&self, policy: &FridgePolicy, rel_voltage: f64, rng: &mut R) -> Transition<Self> {
        let low = policy.reactive && rel_voltage < policy.threshold_low;
        let high = policy.reactive && rel_voltage > policy.threshold_high;
        let cycle = self.cycle;

        match self.mode {
            FridgeMode::On | FridgeMode::Forced => {
                let phase = self.phase + 1;
                let mode = if phase >= cycle.on_duration {
                    FridgeMode::Off
                } else {
                    self.mode
                };
                Transition::stay(Self {
                    phase,
                    mode,
                    ..self.clone()
                })
            }
            FridgeMode::Off => {
                let phase = self.phase + 1;
                if phase >= cycle.period() {
                    if randomized_gate(low, policy.act_probability, rng) {
                        Transition::stay(Self {
                            mode: FridgeMode::Postponed,
                            postponed_for: 1,
                            resume_wait: None,
                            ..self.clone()
                        })
                    } else {
                        self.activation(FridgeMode::On, self.held())
                    }
                } else if randomized_gate(high, policy.act_probability, rng) {
                    let denied = Self { phase, ..self.clone() };
                    self.activation(FridgeMode::On, denied)
                } else {
                    Transition::stay(Self { phase, ..self.clone() })
                }
            }
            FridgeMode::Postponed => {
                if self.postponed_for >= cycle.max_postpone {
                    return self.activation(FridgeMode::Forced, self.held());
                }
                if low {
                    let mut next = self.held();
                    next.resume_wait = None;
                    return Transition::stay(next);
                }
                let wait = match self.resume_wait {
                    Some(w) => w.saturating_sub(1),
                    None if policy.resume_wait_max == 0 => 0,
                    None => rng.random_range(0..=policy.resume_wait_max),
                };
                if wait == 0 {
                    let mut denied = self.held();
                    denied.resume_wait = None;
                    self.activation(FridgeMode::On, denied)
                } else {
                    let mut next = self.held();
                    next.resume_wait = Some(wait);
                    Transition::stay(next)
                }
            }
        }
    }
}

/// Steps a fridge with no central coordination; returns the next state and
/// whether its flexible load is connected.
pub fn fridge_step<R: Rng + ?Sized>(
    agent: &FridgeAgent,
    policy: &FridgePolicy,
    rel_voltage: f64,
    rng: &mut R,
) -> (FridgeAgent, bool) {
    let next = agent.step(policy, rel_voltage, rng).commit(true);
    let on = next.is_on();
    (next, on)
}
