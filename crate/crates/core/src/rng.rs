//! Seeded random streams.
//!
//! Every randomized stage draws from its own ChaCha stream whose seed is
//! derived from a master seed and a stage name, so adding or resizing one
//! stage never shifts the numbers another stage sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TskRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TskRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the named sub-stream of `master`.
pub fn substream(master: u64, name: &str) -> u64 {
    let mut h = splitmix64(master);
    for b in name.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

/// Seed of the named sub-stream further keyed by a tuple of indices.
pub fn substream_indexed(master: u64, name: &str, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(substream(master, name), |h, &i| splitmix64(h ^ splitmix64(i)))
}
