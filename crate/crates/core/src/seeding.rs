//! Stable seed derivation so parallel units (trees, folds, companies) get
//! independent deterministic streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates related seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a salt path.
pub fn derive(seed: u64, salts: &[u64]) -> u64 {
    let mut s = mix(seed);
    for &salt in salts {
        s = mix(s ^ mix(salt));
    }
    s
}

pub fn rng(seed: u64, salts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, salts))
}

/// Stable FNV-1a over a string, for salting by identifiers.
pub fn salt_str(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
