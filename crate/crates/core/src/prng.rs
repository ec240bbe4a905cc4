//! Portable seeded sampling.
//!
//! Streams come from PCG32 (XSH-RR output, 64-bit LCG state) constructed as
//! `Pcg32::new(seed, STREAM)`. Bounded draws use rejection on 32-bit outputs
//! and sampling without replacement is a partial Fisher-Yates shuffle, so a
//! given seed yields the same selection in any implementation that follows
//! `docs/PRNG.md`.

use rand_core::Rng;
use rand_pcg::Pcg32;

/// Increment selector passed to every PCG32 stream.
pub const STREAM: u64 = 0xda3e_39cb_94b9_5bdb;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Pcg32,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            inner: Pcg32::new(seed, STREAM),
        }
    }

    /// A stream derived from `seed` and a label, for independent substreams.
    pub fn derived(seed: u64, label: u64) -> Self {
        SeededRng::new(splitmix64(seed ^ splitmix64(label)))
    }

    pub fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    pub fn next_u64(&mut self) -> u64 {
        let hi = self.next_u32() as u64;
        let lo = self.next_u32() as u64;
        hi << 32 | lo
    }

    /// Uniform integer in `[0, bound)`. Panics on `bound == 0`.
    pub fn below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u32();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    /// Draws `n` distinct indices from `0..len` in selection order.
    pub fn sample_indices(&mut self, len: usize, n: usize) -> Vec<usize> {
        assert!(n <= len, "cannot draw {n} of {len}");
        assert!(len <= u32::MAX as usize);
        let mut pool: Vec<usize> = (0..len).collect();
        for i in 0..n {
            let j = i + self.below((len - i) as u32) as usize;
            pool.swap(i, j);
        }
        pool.truncate(n);
        pool
    }
}

/// SplitMix64 finalizer, used to decorrelate derived seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a string (FNV-1a), for per-episode seeds.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
