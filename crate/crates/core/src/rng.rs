//! Seed derivation.
//!
//! Every random decision in a run draws from a generator seeded by
//! [`derive_seed`] over the master seed and a path of integers (split index,
//! sample index, step tag, ...). Results therefore never depend on the order
//! in which parallel tasks execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of integers into a new seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ 0x5E_ED0F_CA5E);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    h
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable tags for sub-seeds inside one workflow.
pub mod tags {
    pub const INNER_SPLITS: u64 = 1;
    pub const RELIEF: u64 = 10;
    pub const SELECT_FROM_MODEL: u64 = 11;
    pub const RESAMPLE: u64 = 12;
    pub const CLASSIFIER: u64 = 13;
    pub const OUTER_SPLIT: u64 = 20;
    pub const OPTIMIZER: u64 = 21;
    pub const BOOTSTRAP: u64 = 22;
    pub const FORWARD_SELECTION: u64 = 23;
    pub const SAMPLE: u64 = 24;
}
