//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random stream in the crate is a `ChaCha8Rng` whose 64-bit seed is
//! derived from the experiment's base seed by folding a path of integers
//! (trial index, stream purpose, time step, ...) through SplitMix64. The mix is
//! a fixed integer function, so seeds are identical across platforms and
//! independent of the order in which trials or steps are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes, folded into the seed path so streams never collide.
pub mod purpose {
    pub const RANGES: u64 = 1;
    pub const OUTLIERS: u64 = 2;
    pub const INIT: u64 = 3;
}

/// One round of the SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `base`: `s <- splitmix64(s ^ splitmix64(p))` per element.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |s, &p| splitmix64(s ^ splitmix64(p)))
}

/// Seed of trial `trial` under experiment seed `base`.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, &[trial as u64])
}

pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[purpose, index]))
}
