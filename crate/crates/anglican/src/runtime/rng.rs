//! Seedable random source with independent split streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Counter-based generator (256-bit state). The same seed always produces the
/// same stream, and `split` derives a child stream that evolves independently
/// of its parent, which is what per-particle and per-chain execution needs.
#[derive(Clone, Debug)]
pub struct Rng(ChaCha20Rng);

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Derives an independent child stream by drawing a fresh 256-bit seed.
    pub fn split(&mut self) -> Rng {
        let mut seed = [0u8; 32];
        self.0.fill_bytes(&mut seed);
        Rng(ChaCha20Rng::from_seed(seed))
    }

    /// Uniform draw in [0, 1).
    pub fn unit(&mut self) -> f64 {
        rand::Rng::gen::<f64>(&mut self.0)
    }

    /// Uniform integer in [lo, hi).
    pub fn int_range(&mut self, lo: i64, hi: i64) -> i64 {
        rand::Rng::gen_range(&mut self.0, lo..hi)
    }

    pub fn inner(&mut self) -> &mut ChaCha20Rng {
        &mut self.0
    }
}
