//! Deterministic RNG streams.
//!
//! All randomness in the crate flows from one `u64` seed. Independent
//! concerns (weight init, dropout, augmentation, simulation) each derive a
//! named stream so that adding draws to one concern never shifts another.
//! Streams are derived by hashing `(seed, label, index)` with SHA-256 into a
//! ChaCha8 key, which is stable across platforms and process runs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives the ChaCha key for a named stream.
fn key(seed: u64, label: &str, index: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(label.as_bytes());
    hasher.update([0x1f]);
    hasher.update(index.to_le_bytes());
    hasher.finalize().into()
}

/// Named stream for a top-level concern, e.g. `stream(seed, "init")`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(key(seed, label, 0))
}

/// Indexed substream, e.g. one per seed task or per epoch.
pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(key(seed, label, index))
}

/// Folds a string into a stream index. Used where the natural key is an id
/// rather than a position.
pub fn index_of(name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
