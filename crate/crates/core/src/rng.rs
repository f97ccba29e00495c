//! Seed derivation for reproducible parallel work.
//!
//! Parallel units (forest members, benchmark replications, Monte Carlo
//! chunks) each receive an independent seed derived from a master seed and
//! the unit index, so results do not depend on scheduling order.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// SplitMix64 finalizer; a single step mixes (master, stream) into a
/// well-distributed child seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic generator for a derived stream.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

/// Deterministic generator for a master seed.
pub fn master_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
