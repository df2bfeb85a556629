//! Seed derivation. Every random stream in the simulator is a ChaCha8 stream
//! keyed by a seed derived from the experiment seed and a purpose label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministically mixes a base seed with a label and indices.
pub fn derive_seed(base: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(base: u64, label: &str, indices: &[u64]) -> ChaCha8Rng {
    rng(derive_seed(base, label, indices))
}
