//! Seed derivation. Every random stream in the crate comes from a
//! `ChaCha8Rng` whose seed is a splitmix64 hash of a master seed and a
//! small tuple of stream coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `coords` into `master` one coordinate at a time.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Seed of stream `stream` (0, 1, 2, ...) for environment `env_id`.
pub fn substream_seed(master: u64, env_id: u64, stream: u64) -> u64 {
    derive_seed(master, &[env_id, stream])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
