//! Counter-addressed random streams.
//!
//! Draw `c` of stream `s` under seed `k` is a pure function of `(k, s, c)`:
//! ChaCha8 keyed by the seed, stream id `s`, and word position `2c`. Results
//! therefore do not depend on which thread consumes which stream.

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream);
        StreamRng { inner }
    }

    /// Stream positioned so the next draw is counter `counter`.
    pub fn at(master_seed: u64, stream: u64, counter: u64) -> Self {
        let mut rng = Self::new(master_seed, stream);
        rng.seek(counter);
        rng
    }

    pub fn seek(&mut self, counter: u64) {
        self.inner.set_word_pos(2 * counter as u128);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` from the top 53 bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform angle on `[-pi, pi)`.
    pub fn angle(&mut self) -> f64 {
        let x = -PI + 2.0 * PI * self.uniform();
        if x >= PI {
            -PI
        } else {
            x
        }
    }
}
