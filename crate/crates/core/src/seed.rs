//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by the user seed plus a fixed stream tag, so runs never depend on
//! wall-clock entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes `seed`, a stream tag and an index into a new 64-bit seed (splitmix64 finaliser).
pub fn derive(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    rng(derive(seed, tag, index))
}

pub(crate) mod tags {
    pub const SPLIT_EASY: u64 = 1;
    pub const SPLIT_HARD: u64 = 2;
    pub const PAIR_CAP: u64 = 3;
    pub const EPOCH: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SYNTH_CAMERA: u64 = 6;
    pub const SYNTH_FRAME: u64 = 7;
    pub const GRAD_CHECK: u64 = 8;
    pub const SYNTH_SCENE: u64 = 9;
    pub const RANDOM_PAIRS: u64 = 10;
}
