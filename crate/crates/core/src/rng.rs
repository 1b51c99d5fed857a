//! Deterministic named-stream seeding.
//!
//! All randomness flows from one root seed. Independent streams are derived
//! by hashing a stream name (and optional cell coordinates) into the root, so
//! adding a consumer never perturbs the draws seen by existing ones.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for the named stream derived from the root seed.
pub fn stream_seed(root: u64, name: &str) -> u64 {
    splitmix64(root ^ fnv1a(name.as_bytes()))
}

/// RNG for a named stream.
pub fn stream_rng(root: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(root, name))
}

/// RNG for a named stream indexed by a cell, e.g. (asset, month).
pub fn cell_rng(root: u64, name: &str, a: u64, b: u64) -> ChaCha8Rng {
    let s = stream_seed(root, name);
    ChaCha8Rng::seed_from_u64(splitmix64(s ^ splitmix64(a.wrapping_mul(0x9e37_79b9).wrapping_add(b))))
}
