//! Seeded, splittable random streams.
//!
//! Every stochastic operation takes an explicit [`RngStream`]. Streams are
//! ChaCha8 instances: a seed plus a 64-bit stream id selects an independent
//! keystream, so substreams can be derived deterministically for parallel
//! cells without coordinating state.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Deterministic child stream. The same `(seed, stream, id)` always
    /// yields the same child regardless of how much the parent was used.
    pub fn substream(&self, id: u64) -> Self {
        let mixed = splitmix(self.stream ^ splitmix(id.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        Self::with_stream(self.seed, mixed)
    }

    /// Bernoulli draw with success probability `p` (clamped to [0, 1]).
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform draw in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn u128(&mut self) -> u128 {
        ((self.inner.next_u64() as u128) << 64) | self.inner.next_u64() as u128
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
