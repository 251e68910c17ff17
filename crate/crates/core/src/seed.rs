//! Keyed seed streams.
//!
//! Every stochastic component draws from a ChaCha stream whose seed is a pure
//! function of the master seed and a structural key (patient, tree index,
//! repeat/fold, ...). Parallel and sequential schedules therefore consume
//! identical random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a sequence of integer keys.
pub fn derive(master: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// FNV-1a over the bytes of a string key.
pub fn hash_str(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn stream(master: u64, keys: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(master, keys))
}

/// Tags keeping component streams apart when they share numeric keys.
pub mod tag {
    pub const COHORT: u64 = 0x01;
    pub const FOREST: u64 = 0x02;
    pub const TREE: u64 = 0x03;
    pub const MLP: u64 = 0x04;
    pub const FOLDS: u64 = 0x05;
    pub const INNER: u64 = 0x06;
    pub const OUTER: u64 = 0x07;
    pub const IMPUTE: u64 = 0x08;
    pub const RANK: u64 = 0x09;
    pub const SEARCH: u64 = 0x0a;
}
