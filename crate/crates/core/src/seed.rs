//! Seed fan-out. Every stage draws its own generator from the run seed so
//! that stages can be rerun in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha512};

/// First eight bytes (big-endian) of `SHA-512("{seed}:{label}")`.
pub fn derive(seed: u64, label: &str) -> u64 {
    let digest = Sha512::digest(format!("{seed}:{label}").as_bytes());
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(first)
}

pub fn rng(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, label))
}
