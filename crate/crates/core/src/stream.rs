//! Deterministic substream derivation for seeded, parallel runs.
//!
//! Every worker task derives its own generator from the master seed plus a
//! fixed tag path (e.g. replicate index, feature index), so results never
//! depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent ChaCha8 generator from `seed` and a tag path.
///
/// The same `(seed, tags)` pair always yields the same stream; distinct tag
/// paths yield streams that are independent for practical purposes.
pub fn substream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let w = splitmix64(h.wrapping_add(1 + i as u64));
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Root generator for a master seed (empty tag path).
pub fn master(seed: u64) -> ChaCha8Rng {
    substream(seed, &[])
}
