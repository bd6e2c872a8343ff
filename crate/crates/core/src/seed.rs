//! Deterministic random substreams.
//!
//! Every draw in the crate comes from a ChaCha8 stream keyed by
//! `(base seed, purpose, node)`, so the numbers a node sees never depend on
//! how many other nodes, trials or threads exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. The discriminant is part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Support = 1,
    Dictionary = 2,
    Signal = 3,
    Noise = 4,
    VoteModel = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    /// Folds `parts` into the seed, one splitmix round per part.
    pub fn derive(self, parts: &[u64]) -> Seed {
        Seed(
            parts
                .iter()
                .fold(splitmix64(self.0), |acc, &p| splitmix64(acc ^ splitmix64(p))),
        )
    }

    pub fn stream(self, purpose: Purpose, node: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.derive(&[purpose as u64, node]).0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
