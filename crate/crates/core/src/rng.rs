//! Deterministic random-number plumbing.
//!
//! Every randomized routine in the crate takes a `u64` seed and derives one
//! independent ChaCha stream per replicate, so results are bit-identical
//! across runs and thread counts: replicate `i` always sees the same stream
//! no matter which worker executes it or in which order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for replicate `stream` of an experiment seeded with `seed`.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stateless seed derivation (SplitMix64 finalizer) for nested experiments
/// that need sub-seeds per replicate without correlated streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
