//! Seeded random number generation on top of the ChaCha8 stream cipher.
//!
//! ChaCha8 has a fully specified output sequence, so a seed reproduces the
//! same draws on every platform. All sampling helpers below are written
//! against raw `next_u64` output; nothing depends on distribution code that
//! might change between library versions.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RngState {
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn seeded(seed: u64) -> Self {
        RngState {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n). Uses rejection sampling so every value is
    /// exactly equally likely.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Poisson draw by Knuth's product method. Fine for the small means used
    /// by the corpus synthesizer.
    pub fn poisson(&mut self, mean: f64) -> usize {
        let limit = (-mean).exp();
        let mut k = 0usize;
        let mut p = 1.0;
        loop {
            p *= self.uniform();
            if p <= limit {
                return k;
            }
            k += 1;
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Derives an independent generator by drawing a fresh seed. Forking a
    /// sub-generator per work item before fanning out keeps parallel code
    /// deterministic regardless of scheduling.
    pub fn fork(&mut self) -> RngState {
        RngState::seeded(self.next_u64())
    }
}
