//! Seed handling.
//!
//! All randomness comes from ChaCha8 streams. A logical purpose (event
//! generation, estimator sampling, ...) derives its own seed with
//! [`derive_seed`]; per-item randomness then uses the item index as the
//! ChaCha stream id, so results never depend on how work is split across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer over `seed ^ tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub(crate) mod tags {
    pub const EVENTS: u64 = 1;
    pub const CAMPAIGNS: u64 = 2;
    pub const BASE: u64 = 3;
    pub const ESTIMATOR_SAMPLE: u64 = 10;
    pub const ESTIMATOR_DRAWS: u64 = 11;
    pub const RESIDUAL: u64 = 12;
    pub const NAIVE: u64 = 20;
    pub const RATE_SUBSAMPLE: u64 = 21;
    pub const SMOOTHNESS: u64 = 30;
    pub const HOEFFDING: u64 = 31;
    pub const ACTIVATIONS: u64 = 32;
    pub const STREAM: u64 = 40;
    pub const FIXTURE: u64 = 41;
}
