//! Seed derivation. Every random stream in a run is a pure function of the
//! run seed and a fixed stream id, so results never depend on wall clock,
//! thread timing, or call interleaving.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_PARTICIPANTS: u64 = 1;
pub const STREAM_EPISODE_BASE: u64 = 2;
pub const STREAM_SHIFT_EVAL: u64 = 3;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a stream id into a master seed; distinct streams give independent seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn agent_init_stream(agent: usize) -> u64 {
    0x1000 + 4 * agent as u64
}

pub fn agent_act_stream(agent: usize) -> u64 {
    0x1001 + 4 * agent as u64
}

pub fn agent_replay_stream(agent: usize) -> u64 {
    0x1002 + 4 * agent as u64
}

/// Per-episode reset seed, stable under changes to agent count or step count.
pub fn episode_seed(master: u64, episode: usize) -> u64 {
    derive_seed(derive_seed(master, STREAM_EPISODE_BASE), episode as u64)
}

pub fn rng_from(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}
