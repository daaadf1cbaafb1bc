//! Discrete-time agent-based simulation of smart appliances sharing one DC
//! bus.
//!
//! The crate is split along the three layers of the model:
//!
//! - [`circuit`]: the physical bus, a source behind a series resistance
//!   feeding parallel resistive loads;
//! - [`market`] and the sensed bus voltage: the signals agents observe;
//! - [`devices`] and the coordinator in [`engine`]: the decisions agents
//!   take on those signals.
//!
//! [`engine::run`] composes them into a deterministic, seeded run producing
//! a [`trace::SimTrace`]; [`analysis`] turns traces and measured frequency
//! series into stability and time-of-day statistics.

pub mod analysis;
pub mod circuit;
pub mod devices;
pub mod engine;
pub mod market;
pub mod numfmt;
pub mod rng;
pub mod trace;

pub use engine::{run, ScenarioConfig, Simulation};
pub use trace::{SimTrace, TraceRow};
