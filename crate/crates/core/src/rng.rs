//! Deterministic random substreams.
//!
//! A single 64-bit master seed is expanded into independent ChaCha20
//! streams, one per label. The stream key is the SHA-256 digest of the
//! seed and label, so streams do not depend on the order in which they
//! are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub master: u64,
}

impl Seeds {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// Stream keyed by `label`.
    pub fn stream(&self, label: &str) -> ChaCha20Rng {
        self.stream_indexed(label, 0)
    }

    /// Stream keyed by `label` and a replicate index.
    pub fn stream_indexed(&self, label: &str, index: u64) -> ChaCha20Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        hasher.update(index.to_le_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest[..32]);
        ChaCha20Rng::from_seed(key)
    }
}
