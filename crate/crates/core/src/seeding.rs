//! Deterministic seed derivation.
//!
//! Every task in the pipeline derives its own RNG seed from the master seed
//! and a textual task key. No global generator is shared between tasks, so
//! results are reproducible under any degree of parallelism.

/// FNV-1a over bytes; stable across platforms and releases.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64 finalizer; decorrelates nearby inputs.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Seed for a named task under a master seed.
pub fn derive_seed(master: u64, key: &str) -> u64 {
    splitmix64(master ^ fnv1a64(key.as_bytes()))
}
