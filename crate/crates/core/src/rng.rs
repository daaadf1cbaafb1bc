//! Deterministic random streams.
//!
//! Every draw in a run comes from a ChaCha stream keyed by the run seed, a
//! domain tag and an owner id (usually the agent index), with the tick as the
//! stream number. Draws of one agent therefore never depend on how many other
//! agents exist or in which order agents are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains. Adding a domain never perturbs existing ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    AgentInit = 1,
    AgentStep = 2,
    Market = 3,
}

/// Stream number used for one-off draws that are not tied to a tick.
pub const SETUP_STREAM: u64 = u64::MAX;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: Domain, owner: u64, stream: u64) -> StreamRng {
    let mut key = [0u8; 32];
    let mut state = mix64(seed ^ mix64(domain as u64));
    state = mix64(state ^ owner);
    for chunk in key.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Stream for agent `agent` at `tick`.
pub fn agent_stream(seed: u64, agent: usize, tick: u64) -> StreamRng {
    stream(seed, Domain::AgentStep, agent as u64, tick)
}

/// Stream for drawing an agent's initial state.
pub fn agent_init_stream(seed: u64, agent: usize) -> StreamRng {
    stream(seed, Domain::AgentInit, agent as u64, SETUP_STREAM)
}
