//! Appliance agents and the per-agent decision wrappers.
//!
//! Agents are value types stepped once per tick on the signals of the
//! previous tick. A step never mutates the agent in place; it returns a
//! [`Transition`] carrying the next state and, for activations, the state to
//! fall back to when a central coordinator refuses the activation.

mod fridge;
mod washer;

pub use fridge::{fridge_step, FridgeAgent, FridgeCycle, FridgeMode, FridgePolicy};
pub use washer::{update_reference_price, washer_step, WasherAgent, WasherJobs, WasherPolicy};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("{field} out of range: {value} ({expected})")]
    OutOfRange {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
}

pub(crate) fn check(field: &'static str, value: f64, ok: bool, expected: &'static str) -> Result<(), DeviceError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(DeviceError::OutOfRange { field, value, expected })
    }
}

/// Per-step side information used for trace counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    /// The activation is a must-run (postponement limit or job deadline).
    pub forced: bool,
    /// A price-motivated start was blocked by the voltage check.
    pub vetoed: bool,
    /// A start candidate was held back by the randomized gate.
    pub withheld: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<A> {
    pub next: A,
    /// Present exactly when this step switches the flexible load on; the
    /// state to commit if no activation permit is granted.
    pub on_denied: Option<A>,
    pub flags: StepFlags,
}

impl<A> Transition<A> {
    pub fn stay(next: A) -> Self {
        Self {
            next,
            on_denied: None,
            flags: StepFlags::default(),
        }
    }

    pub fn is_activation(&self) -> bool {
        self.on_denied.is_some()
    }

    /// Resolves the transition given the coordinator's decision.
    pub fn commit(self, granted: bool) -> A {
        match (self.on_denied, granted) {
            (Some(denied), false) => denied,
            _ => self.next,
        }
    }
}

/// Acts on a trigger only with probability `act_probability`.
pub fn randomized_gate<R: Rng + ?Sized>(trigger: bool, act_probability: f64, rng: &mut R) -> bool {
    trigger && rng.random_bool(act_probability)
}

/// Lets a candidate start through only if the sensed voltage is at or above
/// the limit.
pub fn voltage_veto(candidate_start: bool, rel_voltage: f64, voltage_limit: f64) -> bool {
    candidate_start && rel_voltage >= voltage_limit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::agent_stream;

    #[test]
    fn gate_degenerate_probabilities() {
        for t in 0..1000 {
            let mut rng = agent_stream(1, 0, t);
            assert!(randomized_gate(true, 1.0, &mut rng));
            assert!(!randomized_gate(true, 0.0, &mut rng));
            assert!(!randomized_gate(false, 1.0, &mut rng));
        }
    }

    #[test]
    fn gate_half_probability_frequency() {
        let n = 100_000u64;
        let mut rng = agent_stream(42, 0, 0);
        let hits = (0..n).filter(|_| randomized_gate(true, 0.5, &mut rng)).count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.5).abs() < 0.01, "acceptance rate {rate}");
    }

    #[test]
    fn veto_examples() {
        assert!(!voltage_veto(true, 0.94, 0.95));
        assert!(voltage_veto(true, 0.96, 0.95));
        assert!(voltage_veto(true, 0.95, 0.95));
        assert!(!voltage_veto(false, 1.0, 0.95));
        assert!(!voltage_veto(false, 0.5, 0.95));
    }

    #[test]
    fn veto_is_monotone_in_voltage() {
        let grid: Vec<f64> = (0..=200).map(|i| 0.9 + 0.001 * i as f64).collect();
        for limit in [0.9, 0.95, 0.99, 1.0] {
            for pair in grid.windows(2) {
                if voltage_veto(true, pair[0], limit) {
                    assert!(voltage_veto(true, pair[1], limit));
                }
            }
        }
    }
}
