//! Deterministic seed derivation.
//!
//! The Monte Carlo harness needs independent RNG streams per (cell, trial,
//! purpose) that depend only on the master seed, never on scheduling. Streams
//! are derived by folding the path components into a 64-bit state with the
//! SplitMix64 finalizer, then seeding a ChaCha stream cipher RNG, whose output
//! is stable across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 scramble round: full-avalanche mixing of a 64-bit word.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of components.
///
/// Distinct paths yield (with overwhelming probability) unrelated seeds, and
/// the result depends only on the values, so concurrent callers agree.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &part in path {
        state = splitmix64(state ^ part.wrapping_mul(0xff51_afd7_ed55_8ccd));
    }
    state
}

/// A ChaCha RNG seeded from a derived path.
pub fn rng_from_path(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// A ChaCha RNG seeded directly from a user-facing seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
