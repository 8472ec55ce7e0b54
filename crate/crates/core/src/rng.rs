//! Seeded random draws with a bit-stable mapping.
//!
//! The engine's determinism contract requires identical seeds to reproduce
//! traces byte for byte, so draws go through one fixed path: a ChaCha8 stream
//! and an explicit 53-bit uniform mapping. Nothing else in the crate consumes
//! randomness.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic uniform generator over closed intervals.
pub struct UniformRng {
    inner: ChaCha8Rng,
}

impl UniformRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw from `[lo, hi]` using the top 53 bits of one u64.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(hi >= lo);
        let u = (self.inner.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}
