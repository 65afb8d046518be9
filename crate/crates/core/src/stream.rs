//! Named deterministic random streams.
//!
//! Every random draw in a run comes from a ChaCha stream whose seed is a
//! mix of the run seed and a structured key, so results do not depend on
//! evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a stream; part of the key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    Init = 1,
    Selection = 2,
    Offspring = 3,
    Adjust = 4,
    Generate = 5,
    Sample = 6,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one 64-bit key.
pub fn mix_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &w| splitmix(acc ^ splitmix(w)))
}

/// Stable 64-bit hash of a string (cell keys in the harness).
pub fn hash_str(s: &str) -> u64 {
    let words: Vec<u64> = s.bytes().map(u64::from).collect();
    mix_words(&words)
}

/// Factory for keyed streams of one run.
#[derive(Clone, Copy, Debug)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, tag: StreamTag, a: u64, b: u64, c: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix_words(&[self.seed, tag as u64, a, b, c]))
    }
}
