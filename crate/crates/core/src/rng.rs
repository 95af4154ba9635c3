//! Deterministic random streams.
//!
//! Every sampler draws from an [`RngStream`]. A stream is a ChaCha8 generator
//! plus the seed it was built from, so it can be forked into child streams
//! whose seeds depend only on the parent seed and a key, never on how much of
//! the parent has been consumed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream keyed by `key`.
    pub fn fork(&self, key: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(key.wrapping_add(1))))
    }

    /// Child stream keyed by a pair, e.g. (epoch, batch).
    pub fn fork2(&self, a: u64, b: u64) -> Self {
        self.fork(a).fork(b)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..=max`.
    pub fn below_inclusive(&mut self, max: u64) -> u64 {
        self.inner.random_range(0..=max)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Two independent standard normal deviates (Box–Muller).
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        // 1 - U lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.standard_normal_pair().0
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
