//! Seeded random streams.
//!
//! Every stream is a xoshiro256++ generator seeded through SplitMix64
//! (`seed_from_u64`). Normal deviates use the ziggurat sampler of
//! `rand_distr::StandardNormal`. All math goes through `libm`, so streams are
//! identical across platforms for a given seed.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
pub use rand_xoshiro::Xoshiro256PlusPlus as StreamRng;

/// Mixes a base seed with a stream index into an independent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer over the combined word.
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Infinite iterator of standard-normal reals.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: StreamRng,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream { rng: stream(seed) }
    }
}

impl Iterator for NormalStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.rng.sample(StandardNormal))
    }
}

pub fn rng_normal_stream(seed: u64) -> NormalStream {
    NormalStream::new(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<f64> = rng_normal_stream(42).take(1000).collect();
        let b: Vec<f64> = rng_normal_stream(42).take(1000).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a: Vec<f64> = rng_normal_stream(1).take(10_000).collect();
        let b: Vec<f64> = rng_normal_stream(2).take(10_000).collect();
        assert_ne!(a, b);
    }

    #[test]
    fn moments_of_a_million_draws() {
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for z in rng_normal_stream(7).take(n) {
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let seeds: Vec<u64> = (0..1000).map(|i| derive_seed(5, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_ne!(derive_seed(5, 0), derive_seed(6, 0));
    }
}
