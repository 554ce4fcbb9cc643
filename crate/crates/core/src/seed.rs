//! Seed derivation.
//!
//! All randomness flows from a root seed. Sub-seeds are derived by hashing the
//! root together with a namespace string and any identifying parts, so results
//! never depend on call order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Incremental builder for a derived 64-bit seed.
#[derive(Clone)]
pub struct SeedHasher(Sha256);

impl SeedHasher {
    pub fn new(root: u64, namespace: &str) -> Self {
        let mut h = Sha256::new();
        h.update(root.to_le_bytes());
        h.update((namespace.len() as u64).to_le_bytes());
        h.update(namespace.as_bytes());
        Self(h)
    }

    pub fn str(mut self, part: &str) -> Self {
        self.0.update((part.len() as u64).to_le_bytes());
        self.0.update(part.as_bytes());
        self
    }

    pub fn u64(mut self, part: u64) -> Self {
        self.0.update(part.to_le_bytes());
        self
    }

    pub fn f64(self, part: f64) -> Self {
        self.u64(part.to_bits())
    }

    pub fn finish(self) -> u64 {
        let digest = self.0.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.finish())
    }
}

/// Seed for a named stage derived from the root seed.
pub fn derive(root: u64, namespace: &str) -> u64 {
    SeedHasher::new(root, namespace).finish()
}
