//! Deterministic counter-based pseudo-randomness.
//!
//! Every sampling oracle and random generator in the crate draws from this
//! generator so that a fixed seed yields byte-identical results on every
//! platform. SplitMix64 is used because its output is a pure function of
//! (seed, counter) with no hidden state beyond the counter.

/// SplitMix64 stream over an incrementing counter.
#[derive(Debug, Clone)]
pub struct Stream {
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { counter: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.counter;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform draw from `0..bound` (`bound > 0`).
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // rejection sampling to avoid modulo bias
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }
}
