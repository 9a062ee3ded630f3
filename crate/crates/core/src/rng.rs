//! Keyed deterministic random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Algorithm identifier recorded in manifests.
pub const PRNG_ID: &str = "ChaCha8Rng (rand_chacha 0.3), seeded by SHA-256(seed || key)";

/// Independent stream for `(seed, key)`; stable across platforms and runs.
pub fn derived_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}
