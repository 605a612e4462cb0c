//! Seed derivation for reproducible, parallelism-independent randomness.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` whose seed is
//! derived from a master seed and the indices that identify the decision
//! (trial number, seed slot, method). Deriving instead of sharing one stream
//! makes results identical at any level of parallelism.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, the standard 64-bit finalizer used to decorrelate seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Mix a master seed with a stream index.
pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x51a299ab)))
}

/// Mix a master seed with two stream indices (e.g. seed slot and trial).
pub fn mix2(seed: u64, a: u64, b: u64) -> u64 {
    mix(mix(seed, a), b)
}

/// Deterministic generator for the given derived seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
