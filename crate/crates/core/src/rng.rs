//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream selected by
//! `(seed, purpose, index)`, so results do not depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A named family of independent streams derived from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(seed: u64, purpose: &str) -> Self {
        Self {
            key: splitmix64(seed ^ fnv1a(purpose.as_bytes())),
        }
    }

    /// Nested family, e.g. per-pair streams under a command-level stream.
    pub fn child(&self, purpose: &str, index: u64) -> Self {
        Self {
            key: splitmix64(self.key ^ fnv1a(purpose.as_bytes()) ^ splitmix64(index)),
        }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(index);
        rng
    }

    /// A 64-bit seed for APIs that take one.
    pub fn seed(&self, index: u64) -> u64 {
        splitmix64(self.key ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
