//! Deterministic RNG stream derivation.
//!
//! All randomness in the crate flows from a single master seed. Independent
//! streams are derived from `(seed, label)` so that adding or reordering
//! consumers does not perturb unrelated streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes; stable across platforms and versions.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent RNG stream from the master seed and a label.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut state = seed ^ fnv1a(label.as_bytes());
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derive a sub-seed (for handing to another component) rather than a stream.
pub fn subseed(seed: u64, label: &str) -> u64 {
    let mut state = seed ^ fnv1a(label.as_bytes());
    splitmix(&mut state)
}
