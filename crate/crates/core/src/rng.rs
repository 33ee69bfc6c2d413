//! Seedable random streams.
//!
//! Every stream is a ChaCha8 keystream. The 256-bit key is expanded from the
//! 64-bit master seed with SplitMix64 (four consecutive outputs, little-endian)
//! and the ChaCha stream word is set to `stream_id`. This derivation is part of
//! the trace format: changing it changes every recorded trace.
//!
//! Bin indices are drawn with Lemire's multiply-and-reject method on 64-bit
//! words, so a given `(master_seed, stream_id)` produces the same destinations
//! on every platform and every build of this crate.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Source of uniform bin choices. The engine is generic over this so tests
/// can substitute deliberately broken samplers.
pub trait Sampler {
    fn next_u64(&mut self) -> u64;

    /// The seed that reproduces this sampler, reported next to every verdict.
    fn seed(&self) -> u64;

    /// Uniform index in `0..n`. `n` must be non-zero.
    fn sample_bin(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let range = n as u64;
        let mut wide = u128::from(self.next_u64()) * u128::from(range);
        let mut low = wide as u64;
        if low < range {
            let floor = range.wrapping_neg() % range;
            while low < floor {
                wide = u128::from(self.next_u64()) * u128::from(range);
                low = wide as u64;
            }
        }
        (wide >> 64) as usize
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fisher-Yates shuffle driven by `sample_bin`.
    fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.sample_bin(i + 1);
            items.swap(i, j);
        }
    }
}

impl<S: Sampler + ?Sized> Sampler for &mut S {
    fn next_u64(&mut self) -> u64 {
        (**self).next_u64()
    }

    fn seed(&self) -> u64 {
        (**self).seed()
    }
}

/// SplitMix64 finalizer; also used to fold grid coordinates into stream ids.
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable stream id for one point of an experiment grid.
pub fn stream_for(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5ee_d0f4_b1e5_u64, |acc, &p| mix64(acc ^ mix64(p)))
}

#[derive(Clone, Debug)]
pub struct RandomSource {
    rng: ChaCha8Rng,
    master_seed: u64,
    stream_id: u64,
}

impl RandomSource {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = mix64(master_seed.wrapping_add((i as u64).wrapping_mul(GOLDEN)));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id);
        Self {
            rng,
            master_seed,
            stream_id,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent stream for an auxiliary purpose (tie-breaking, branching)
    /// that must not perturb the draws of this one.
    pub fn fork(&self, domain: u64) -> RandomSource {
        RandomSource::new(mix64(self.master_seed ^ mix64(domain)), self.stream_id)
    }
}

impl Sampler for RandomSource {
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn seed(&self) -> u64 {
        self.master_seed
    }
}
