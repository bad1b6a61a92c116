//! Seeded random streams.
//!
//! Every stochastic stage draws from its own ChaCha8 stream keyed by
//! `(run seed, stage, index)`, where `index` is usually a frame or episode
//! number. Results therefore do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags for [`stream`].
pub mod stage {
    pub const SOFT_MASK: u64 = 1;
    pub const PERTURB: u64 = 2;
    pub const FAILURES: u64 = 3;
    pub const SPLIT: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit key for `(seed, stage, index)`.
pub fn derive_seed(seed: u64, stage: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stage) ^ index)
}

pub fn stream(seed: u64, stage: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stage, index))
}
