//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng`
//! seeded from a master seed mixed with a stream tag through SplitMix64, so
//! results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `tag` of `seed`.
pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    rng(derive(seed, tag))
}

// stream tags
pub(crate) const TAG_HOLDOUT: u64 = 1;
pub(crate) const TAG_BAGGING: u64 = 2;
pub(crate) const TAG_COLSAMPLE: u64 = 3;
pub(crate) const TAG_TREE: u64 = 4;
pub(crate) const TAG_FOLDS: u64 = 5;
pub(crate) const TAG_VERDICT_SPLIT: u64 = 6;
pub(crate) const TAG_FIT: u64 = 7;
pub(crate) const TAG_SUBSAMPLE: u64 = 8;
pub(crate) const TAG_RUN: u64 = 9;
