//! Counter-based random streams.
//!
//! Draw `n` of a stream with seed `s` is `mix64(s + n·γ)` where `γ` is the
//! 64-bit golden-ratio increment and `mix64` the SplitMix64 finaliser. The
//! sequence therefore depends only on `(seed, counter)` and is identical on
//! every platform. Child streams are keyed by a label hashed with FNV-1a and
//! never depend on how many values the parent has already produced.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Derive an independent stream for `label`.
    pub fn child(&self, label: &str) -> RngStream {
        RngStream::new(mix64(self.seed ^ mix64(fnv1a(label))))
    }

    /// Derive an independent stream for `(label, index)`.
    pub fn child_indexed(&self, label: &str, index: u64) -> RngStream {
        let base = self.child(label).seed;
        RngStream::new(mix64(base.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)))))
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }

    /// Uniform index in `0..n`. Panics when `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "RngStream::below called with n = 0");
        self.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(self);
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        let xa: Vec<u64> = (0..100).map(|_| a.next_word()).collect();
        let xb: Vec<u64> = (0..100).map(|_| b.next_word()).collect();
        assert_eq!(xa, xb);
        assert_eq!(a.counter(), 100);
    }

    #[test]
    fn known_first_words() {
        // SplitMix64 reference values for seed 0.
        let mut r = RngStream::new(0);
        assert_eq!(r.next_word(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_word(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn children_ignore_parent_draws() {
        let parent = RngStream::new(7);
        let mut advanced = parent.clone();
        for _ in 0..17 {
            advanced.next_word();
        }
        assert_eq!(parent.child("noise"), advanced.child("noise"));
        assert_ne!(parent.child("noise"), parent.child("data"));
        assert_ne!(parent.child_indexed("x", 0), parent.child_indexed("x", 1));
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = RngStream::new(3);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = RngStream::new(11);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }
}
