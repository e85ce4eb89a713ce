//! Deterministic, splittable random streams.
//!
//! A [`RandomStream`] is a ChaCha8 keystream. Splitting derives a child on a
//! fresh 64-bit stream id computed from the parent's stream id and the child
//! index, so a child depends only on `(seed, split path)` and never on how
//! many values the parent has already produced.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Child stream `index`. Same parent seed/path and index give the same child.
    pub fn split(&self, index: u64) -> Self {
        let parent = self.rng.get_stream();
        let child = splitmix64(parent ^ splitmix64(index.wrapping_add(1)));
        let mut rng = ChaCha8Rng::from_seed(self.rng.get_seed());
        rng.set_stream(child);
        Self { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on (0, 1]: never returns 0, so `ln` of the result is finite.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_M53
    }

    /// Exponential with the given rate.
    pub fn exp(&mut self, rate: f64) -> f64 {
        -self.uniform_open0().ln() / rate
    }
}
