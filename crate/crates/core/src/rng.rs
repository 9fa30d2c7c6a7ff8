//! Seeded randomness.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is
//! derived from a user seed and a purpose tag. The derivation uses FNV-1a over
//! the tag bytes followed by the SplitMix64 finalizer, so streams are stable
//! across platforms and compiler versions and independent of one another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a, 64 bit.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `(seed, purpose)`.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(purpose.as_bytes())))
}

/// Seed for the `index`-th member of a family of streams, e.g. one per frame.
pub fn derive_indexed(seed: u64, purpose: &str, index: u64) -> u64 {
    splitmix64(derive_seed(seed, purpose) ^ splitmix64(index))
}

/// Generator for an already-derived seed.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, purpose: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, purpose))
}

pub fn indexed_stream(seed: u64, purpose: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_indexed(seed, purpose, index))
}
