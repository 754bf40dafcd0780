//! Seed derivation for counter-style random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream whose 256-bit
//! seed is derived from a small set of integers (base seed, tag, instance
//! index, purpose). Streams are therefore addressable: any single draw can be
//! regenerated in isolation, instances are independent of how work is split
//! across threads, and two runs that share a tag consume identical disorder.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer. Good avalanche behavior, cheap, stable.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over raw bytes. Used for tag hashing and instance digests; not
/// cryptographic, just stable across platforms and runs.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Expands the words identifying a stream into a ChaCha generator.
pub(crate) fn stream(words: [u64; 4]) -> ChaCha12Rng {
    // Absorb the words into a splitmix state, then squeeze the seed out of it.
    let mut state = 0x243f_6a88_85a3_08d3u64;
    for w in words {
        state = mix64(state.wrapping_add(GAMMA) ^ w);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = state.wrapping_add(GAMMA);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Purpose tags separating the sub-streams of one instance.
pub(crate) mod purpose {
    /// Signal sections and their atom indices.
    pub const SIGNAL: u64 = 0x01;
    /// Side-channel noise, one component per signal entry.
    pub const SIDE: u64 = 0x02;
    /// Measurement row `r`: matrix entries first, then the row's noise.
    pub fn row(r: usize) -> u64 {
        0x1_0000 + r as u64
    }
}
