//! Seeded randomness.
//!
//! Every stochastic step in the pipeline (class balancing, embedding
//! initialization, epoch shuffles, in-batch negative draws) pulls from a
//! ChaCha8 stream seeded from the run configuration, so identical inputs
//! reproduce identical artifacts bit for bit.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic random stream.
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn seed(seed: u64) -> Self {
        Stream(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent substream; `label` separates the consumers of one seed.
    pub fn substream(seed: u64, label: u64) -> Self {
        let mut root = ChaCha8Rng::seed_from_u64(seed);
        root.set_stream(label);
        Stream(root)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-half_width, +half_width]`.
    pub fn symmetric_f64(&mut self, half_width: f64) -> f64 {
        (self.unit_f64() * 2.0 - 1.0) * half_width
    }

    /// Uniform index in `[0, n)` via rejection sampling (unbiased).
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.0.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// First `k` elements of a seeded permutation of `0..n`, sorted ascending.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> alloc::vec::Vec<usize> {
        let mut all: alloc::vec::Vec<usize> = (0..n).collect();
        let k = k.min(n);
        // partial Fisher-Yates: fix positions 0..k
        for i in 0..k {
            let j = i + self.index(n - i);
            all.swap(i, j);
        }
        let mut picked = all[..k].to_vec();
        picked.sort_unstable();
        picked
    }
}
