//! Splittable random streams.
//!
//! Every random draw in the crate comes from a [`Stream`], a 64-bit key that
//! seeds a ChaCha8 generator. ChaCha is a counter-mode cipher, so a stream is
//! a pure function of its key: child streams derived with [`Stream::substream`]
//! never depend on how many values were drawn elsewhere, which keeps results
//! identical under any thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed ^ 0x6a09_e667_f3bc_c908),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Derives the `index`-th child stream. Children of distinct indices (and
    /// of distinct parents) are statistically independent.
    pub fn substream(&self, index: u64) -> Self {
        let k = mix64(self.key.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))));
        Self {
            key: mix64(k ^ self.key.rotate_left(17)),
        }
    }

    /// Shorthand for a chain of [`Stream::substream`] calls.
    pub fn path(&self, indices: &[u64]) -> Self {
        indices.iter().fold(*self, |s, &i| s.substream(i))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut k = self.key;
        for chunk in seed.chunks_exact_mut(8) {
            k = mix64(k.wrapping_add(GOLDEN_GAMMA));
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_sequence() {
        let a: Vec<u64> = Stream::new(7).substream(3).rng().random_iter().take(16).collect();
        let b: Vec<u64> = Stream::new(7).substream(3).rng().random_iter().take(16).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn children_differ() {
        let s = Stream::new(42);
        let keys: std::collections::HashSet<u64> = (0..10_000).map(|i| s.substream(i).key()).collect();
        assert_eq!(keys.len(), 10_000);
        assert_ne!(s.substream(0).key(), Stream::new(43).substream(0).key());
        assert_ne!(s.path(&[1, 2]).key(), s.path(&[2, 1]).key());
    }
}
