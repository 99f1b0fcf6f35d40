//! Counter-based seed derivation.
//!
//! Every random stream is identified by `(base seed, stream, index)` rather
//! than by the order in which work happens to be scheduled, which keeps
//! results identical regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of item `index` of `stream` under `base`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index)
}

pub fn rng_for(base: u64, stream: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(base, stream, index))
}

/// Named streams so unrelated consumers of one seed never collide.
pub mod stream {
    pub const SNAPSHOT: u64 = 1;
    pub const REALISTIC: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const INIT: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const EVAL: u64 = 6;
    pub const MASK: u64 = 7;
}
