//! Seeded random streams.
//!
//! Each independent unit of work (an MCD start, a k-means start, a grid
//! cell) draws from its own ChaCha stream selected by a counter, so results
//! never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Random stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable 64-bit hash of a sequence of labels, identical across platforms and releases.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

/// `base ⊕ hash(parts)`.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    base ^ stable_hash(parts)
}
