//! Seeded random streams.
//!
//! Every random component (design matrix, beta_*, noise, Monte-Carlo trial
//! `i`, ...) draws from its own ChaCha20 stream whose key packs
//! `(seed, component, index)`, so results do not depend on thread count or
//! on the order in which components are drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier written into output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 keyed by (seed, component, index)";

pub mod component {
    pub const DESIGN: u64 = 1;
    pub const BETA_STAR: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const TRIALS: u64 = 4;
}

pub fn substream(seed: u64, component: u64, index: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&component.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}
