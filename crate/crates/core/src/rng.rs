//! Counter-based seed derivation.
//!
//! Every stochastic step (a sample draw, a retry, a split, a training run)
//! gets its own generator seeded from the master seed plus a path of
//! counters, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `master` with each element of `path` in turn.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng_for(master: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, path))
}

/// Stream tags so that different consumers of the same sample never share
/// a generator.
pub mod stream {
    pub const STRATEGY: u64 = 0x5354_5241;
    pub const DROPOUT: u64 = 0x4452_4f50;
    pub const SPLIT: u64 = 0x5350_4c54;
    pub const TRAIN: u64 = 0x5452_4e00;
    pub const ALPHA: u64 = 0x414c_5048;
}
