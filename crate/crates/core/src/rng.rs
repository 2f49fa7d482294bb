//! Counter-based random streams.
//!
//! Every random draw is a pure function of `(seed, stream, counter)`, so a
//! Monte Carlo sample keyed by its index produces the same value under any
//! parallel schedule. The mixing function is the SplitMix64 finalizer, which
//! is a bijection on `u64` with full avalanche.

use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless-keyed generator: output `k` of stream `s` under seed `seed` is
/// `mix64(key(seed, s) + k * GOLDEN)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(mix64(seed ^ GOLDEN) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93));
        Self { key, counter: 0 }
    }

    /// Stream keyed by a path of identifiers, e.g. `(candidate, component, sample)`.
    pub fn keyed(seed: u64, path: &[u64]) -> Self {
        let mut key = mix64(seed ^ GOLDEN);
        for &p in path {
            key = mix64(key ^ p.wrapping_mul(0xd6e8_feb8_6659_fd93).wrapping_add(GOLDEN));
        }
        Self { key, counter: 0 }
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Draws atom indices proportionally to their weights.
#[derive(Clone, Debug)]
pub struct WeightedSampler {
    cumulative: Vec<f64>,
    total: f64,
}

impl WeightedSampler {
    /// `weights` must be non-negative with a positive sum.
    pub fn new(weights: &[f64]) -> Option<Self> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        (acc > 0.0).then_some(Self { cumulative, total: acc })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Position (not atom index) drawn with probability `w_i / total`.
    #[inline]
    pub fn sample(&self, rng: &mut CounterRng) -> usize {
        let u = rng.uniform() * self.total;
        let pos = self.cumulative.partition_point(|&c| c <= u);
        pos.min(self.cumulative.len() - 1)
    }
}
