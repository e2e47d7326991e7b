//! Seeded random streams.
//!
//! Every stream is ChaCha20 (the `rand_chacha` 0.9 implementation) keyed with a
//! SHA-256 digest of its inputs, so a stream is fully determined by a seed and a
//! purpose label and can be reproduced outside Rust from the same recipe:
//! key = SHA-256(seed as u64 LE || label bytes), nonce 0, stream 0.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha20Rng;

/// Stream for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// 64-bit seed for one unit of work:
/// first 8 bytes (LE) of SHA-256(master LE || kind || 0x00 || trial LE || index LE).
pub fn derive_seed(master: u64, kind: &str, trial: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(kind.as_bytes());
    h.update([0u8]);
    h.update(trial.to_le_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
