//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha20Rng`] seeded with a `u64`.
//! Independent sub-streams are obtained with [`derive_seed`], which mixes a parent
//! seed and a stream tag through SplitMix64. The derivation is pure integer
//! arithmetic, so a given `(seed, tag)` yields the same stream on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type HspRng = ChaCha20Rng;

/// Stream tags used by [`crate::sampler::simulate_experiment`].
pub mod streams {
    pub const HOLOGRAM: u64 = 1;
    pub const MARGINAL_U: u64 = 2;
    pub const MARGINAL_R: u64 = 3;
    pub const DARK_HOLOGRAM: u64 = 4;
    pub const DARK_U: u64 = 5;
    pub const DARK_R: u64 = 6;
    /// Base tag for Monte-Carlo trial `t` (tag = `MC_TRIAL + t`).
    pub const MC_TRIAL: u64 = 1 << 32;
    pub const RETRIEVAL: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `tag` under `parent`.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ tag.rotate_left(17) ^ 0x5851_F42D_4C95_7F2D)
}

pub fn rng_from_seed(seed: u64) -> HspRng {
    ChaCha20Rng::seed_from_u64(seed)
}
