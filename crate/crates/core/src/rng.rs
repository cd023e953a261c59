//! Content-keyed seed derivation.
//!
//! Every random draw in the simulator is made from a generator seeded by a
//! key that depends only on *what* is being drawn (scenario, input point,
//! replicate index), never on call order. Keys are mixed with SplitMix64 and
//! fed to ChaCha8.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a sequence of words into one key; order-sensitive.
pub fn derive_key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| mix64(acc ^ mix64(p)))
}

/// FNV-1a over UTF-8 bytes, for string identifiers.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Hash of the exact bit patterns of a point.
pub fn hash_point(x: &[f64]) -> u64 {
    // -0.0 and 0.0 describe the same input
    let words: Vec<u64> = x
        .iter()
        .map(|v| if *v == 0.0 { 0 } else { v.to_bits() })
        .collect();
    derive_key(&words)
}

/// Seed for the `index`-th child of `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    derive_key(&[master, index])
}

pub fn rng_from_key(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}
