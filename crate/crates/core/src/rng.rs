//! Seeded random streams.
//!
//! Every stochastic draw in the simulator comes from a ChaCha8 stream whose seed
//! is derived from the master seed plus a small key (link endpoints, interval,
//! purpose tag). Draws therefore do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed` with `key` into a fresh independent stream.
pub fn keyed_rng(seed: u64, key: &[u64]) -> SimRng {
    let mut h = splitmix64(seed);
    for &k in key {
        h = splitmix64(h ^ splitmix64(k));
    }
    seeded_rng(h)
}

/// Purpose tags for keyed streams.
pub mod tag {
    pub const SHADOW: u64 = 0x5348_4144;
    pub const BLOCKING: u64 = 0x424C_4F43;
    pub const PREDICTION: u64 = 0x5052_4544;
    pub const SCENARIO: u64 = 0x5343_454E;
}
