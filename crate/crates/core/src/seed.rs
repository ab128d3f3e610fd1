//! Deterministic seed derivation. Every randomized step receives its own
//! generator built from a parent seed and a stable tag, so results do not
//! depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix(splitmix(seed) ^ tag.rotate_left(17) ^ 0xA076_1D64_78BD_642F)
}

/// FNV-1a over the bytes of `s`; stable across platforms and releases.
pub fn tag_str(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn derive_str(seed: u64, tag: &str) -> u64 {
    derive(seed, tag_str(tag))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
