//! Seed derivation.
//!
//! Every random object in the crate is drawn from a ChaCha8 stream seeded
//! from a 64-bit value. Child seeds (per trial, per iteration, per SJLT block)
//! are derived with [`mix_seed`] so that streams never overlap in practice and
//! results are reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser applied to `base ^ golden * (k + 1)`.
pub fn mix_seed(base: u64, k: u64) -> u64 {
    let mut z = base ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
