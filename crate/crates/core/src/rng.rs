//! Run RNG.
//!
//! All randomness goes through [`HocRng`], a ChaCha8 stream generator. ChaCha8
//! is counter-based, so any implementation that follows the conversions below
//! reproduces the same traces:
//!
//! * key: the 64-bit seed as 8 little-endian bytes followed by 24 zero bytes
//! * stream: the stream id (0 for the learner, 1 for the environment)
//! * `uniform()`: `(next_u64 >> 11) * 2^-53`, a value in `[0, 1)`
//! * `below(n)`: `floor(uniform() * n)`
//! * `bernoulli(p)`: `uniform() < p`
//! * `categorical(p)`: smallest `k` with `uniform() < p_0 + ... + p_k`

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub const LEARNER_STREAM: u64 = 0;
pub const ENV_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct HocRng {
    inner: ChaCha8Rng,
}

impl HocRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        HocRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Samples an index from a probability vector.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (k, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = k;
            }
            cum += p;
            if u < cum {
                return k;
            }
        }
        // rounding left cum slightly below 1
        last_positive
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}
