//! Counter-based seed derivation.
//!
//! Training resamples detector noise per (run, epoch, batch, patch) and
//! shuffles per (run, epoch). Deriving child seeds by mixing the coordinates
//! into the run seed keeps every stream reproducible regardless of execution
//! order or parallel scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; full-period bijection on u64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream of coordinates.
pub fn derive(parent: u64, coords: &[u64]) -> u64 {
    let mut state = mix(parent ^ 0x853c_49e6_748f_ea9b);
    for &c in coords {
        state = mix(state ^ c);
    }
    state
}

/// Deterministic RNG for a derived stream.
pub fn rng(parent: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(parent, coords))
}
