//! Seeded, counter-based random streams.
//!
//! Every draw in the crate goes through [`Rng`]. A stream is identified by
//! `(seed, stream)`; position within the stream is the ChaCha word counter.
//! [`Rng::fork`] derives a child stream from the parent's identity and a text
//! label only, so the result does not depend on how many values the parent
//! has already produced. Callers that fan work out in parallel fork one
//! stream per work item with a distinct label.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const ALGORITHM: &str = "chacha8";

/// Serializable position of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

// splitmix64 finalizer
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream keyed by `label`.
    pub fn fork(&self, label: &str) -> Rng {
        let child = mix64(self.stream.rotate_left(17) ^ fnv1a(label.as_bytes()));
        Self::with_stream(self.seed, child)
    }

    pub fn state(&self) -> RngState {
        RngState { seed: self.seed, stream: self.stream, word_pos: self.inner.get_word_pos() }
    }

    pub fn from_state(state: RngState) -> Self {
        let mut rng = Self::with_stream(state.seed, state.stream);
        rng.inner.set_word_pos(state.word_pos);
        rng
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        // Lemire-style rejection keeps the result unbiased.
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.inner.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Inverse-CDF draw from unnormalized non-negative weights.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                if u < w {
                    return i;
                }
                u -= w;
                last_positive = i;
            }
        }
        // rounding pushed u past the end
        last_positive
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(rng: &mut Rng, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.next_u64()).collect()
    }

    #[test]
    fn fork_same_label_is_identical() {
        let root = Rng::new(7);
        assert_eq!(draws(&mut root.fork("a"), 100), draws(&mut root.fork("a"), 100));
    }

    #[test]
    fn fork_distinct_labels_differ() {
        let root = Rng::new(7);
        let a = draws(&mut root.fork("a"), 100);
        let b = draws(&mut root.fork("b"), 100);
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn fork_distinct_seeds_differ() {
        let a = draws(&mut Rng::new(7).fork("a"), 100);
        let b = draws(&mut Rng::new(8).fork("a"), 100);
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn fork_ignores_parent_position() {
        let mut root = Rng::new(3);
        let before = draws(&mut root.fork("x"), 10);
        draws(&mut root, 57);
        assert_eq!(before, draws(&mut root.fork("x"), 10));
    }

    #[test]
    fn state_round_trip_resumes_stream() {
        let mut rng = Rng::new(11).fork("s");
        draws(&mut rng, 13);
        let state = rng.state();
        let expected = draws(&mut rng, 20);
        let mut restored = Rng::from_state(state);
        assert_eq!(draws(&mut restored, 20), expected);
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = Rng::new(1);
        for _ in 0..1000 {
            let k = rng.categorical(&[0.0, 1.0, 0.0, 2.0, 0.0]);
            assert!(k == 1 || k == 3);
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = Rng::new(5);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
