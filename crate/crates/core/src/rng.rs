//! Seed derivation.
//!
//! Every random stream in the pipeline is a ChaCha8 generator seeded from a
//! 64-bit value derived here, so results do not depend on platform, thread
//! count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PipelineRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the UTF-8 bytes. Stable across releases, unlike `DefaultHasher`.
pub fn stable_hash(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Folds a sequence of words into one seed.
pub fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x0005_eed0_fa11_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Per-recording seed for event generation. Depends only on the base seed and
/// the recording id, so FD and VD share placement.
pub fn recording_seed(base_seed: u64, recording_id: &str) -> u64 {
    mix(&[base_seed, stable_hash(recording_id)])
}

pub fn rng_from_seed(seed: u64) -> PipelineRng {
    ChaCha8Rng::seed_from_u64(seed)
}
