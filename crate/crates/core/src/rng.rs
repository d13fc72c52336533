//! Seeded random source.
//!
//! Backed by ChaCha8 (`rand_chacha`), a counter-based stream cipher whose
//! output is specified independently of platform and word size. Seeds are
//! expanded with `SeedableRng::seed_from_u64`. Reals are produced from the top
//! 53 bits of one `u64` draw, `(x >> 11) * 2^-53`, so `next_f64` is uniform on
//! `[0, 1)` with every representable value on the 2^-53 grid.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream used for generated data matrices.
pub const STREAM_DATA: u64 = 0;
/// Stream used for initialization (k-means seeding, random factors).
pub const STREAM_INIT: u64 = 1;
/// Stream used for hyperparameter draws.
pub const STREAM_ALPHA: u64 = 2;

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, STREAM_DATA)
    }

    /// Independent generator for the same seed. Distinct streams never overlap.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[low, high)`. Requires `low < high`.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        debug_assert!(low < high);
        loop {
            let v = low + (high - low) * self.next_f64();
            // rounding can land exactly on `high` for very narrow intervals
            if v < high {
                return v;
            }
        }
    }

    /// Uniform integer on `[0, n)` by rejection, free of modulo bias.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        // 2^64 mod n; values at or above 2^64 - rem are rejected
        let rem = (u64::MAX % n + 1) % n;
        loop {
            let v = self.next_u64();
            if rem == 0 || v < 0u64.wrapping_sub(rem) {
                return (v % n) as usize;
            }
        }
    }

    /// `count` distinct indices from `[0, n)` in draw order (partial Fisher-Yates).
    pub fn sample_distinct(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = Rng::with_stream(42, STREAM_DATA);
        let mut b = Rng::with_stream(42, STREAM_INIT);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn unit_interval() {
        let mut r = Rng::new(3);
        for _ in 0..10_000 {
            let v = r.next_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn distinct_sample() {
        let mut r = Rng::new(5);
        let mut s = r.sample_distinct(50, 50);
        s.sort_unstable();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
        let t = r.sample_distinct(10, 3);
        assert_eq!(t.len(), 3);
        assert!(t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
    }
}
