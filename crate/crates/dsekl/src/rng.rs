//! Deterministic seeding helpers.
//!
//! Every source of randomness in the crate is a [`ChaCha8Rng`] derived from a
//! single root seed. Child streams are split off with a SplitMix64 mix, so
//! adding a repetition or a grid point never perturbs the draws of an
//! existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent child seed from a root seed and a stream id.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer over the combined words.
    let mut z = root ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator used throughout the crate, fully determined by its seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
