//! Counter-based random streams.
//!
//! A [`StreamKey`] is a plain value `(seed, stream)`. Any position inside a
//! stream can be reached directly with [`StreamKey::rng_at`], so draws are
//! addressed by index rather than by call order. This is what lets the
//! process, its companion and its truncations share one innovation sequence,
//! and what makes parallel Monte Carlo results independent of scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    stream: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Child key for sub-stream `index`. Children of distinct indices (or of
    /// distinct parents) are statistically independent streams.
    pub fn derive(&self, index: u64) -> StreamKey {
        let stream = mix64(self.stream.rotate_left(17) ^ mix64(index ^ GOLDEN.rotate_left(7)));
        StreamKey {
            seed: self.seed,
            stream,
        }
    }

    /// Collapse the key into a fresh 64-bit seed, used when handing a derived
    /// stream to a component that takes a plain seed.
    pub fn as_seed(&self) -> u64 {
        mix64(self.seed ^ mix64(self.stream))
    }

    /// Generator positioned at 32-bit word `word` of this stream.
    pub fn rng_at(&self, word: u128) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(word);
        rng
    }
}

/// Uniform on the open interval (0, 1) from one 64-bit word.
#[inline]
pub fn open_unit(x: u64) -> f64 {
    ((x >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
}

/// Uniform integer in `0..n` from one 64-bit word (multiply-shift; bias at most n / 2^64).
#[inline]
pub fn below(x: u64, n: u64) -> u64 {
    ((x as u128 * n as u128) >> 64) as u64
}
