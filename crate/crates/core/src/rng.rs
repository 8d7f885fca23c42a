//! Seeded random streams.
//!
//! Every consumer of randomness in a run gets its own ChaCha stream derived
//! from the run seed, so adding an agent or reordering evaluation never shifts
//! another component's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const ENV_STREAM: u64 = 1;
pub const REPORT_STREAM: u64 = 2;
pub const SETUP_STREAM: u64 = 3;
pub const AGENT_STREAM_BASE: u64 = 1 << 16;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn agent_stream(seed: u64, agent_id: usize) -> SimRng {
    stream(seed, AGENT_STREAM_BASE + agent_id as u64)
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` determined only by `(key, a, b)`.
pub fn keyed_unit(key: u64, a: u64, b: u64) -> f64 {
    let h = mix64(mix64(key ^ mix64(a)) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
