//! Seeded random streams.
//!
//! Every stochastic routine draws from [`SimRng`], ChaCha with 8 rounds.
//! A run seeded with `seed` uses `ChaCha8Rng::seed_from_u64(seed)`;
//! replicate `i` of a batch uses the same key on stream `i`, so replicates
//! are independent and each is reproducible on its own. Uniforms are the
//! top 53 bits of a `u64` scaled to `[0, 1)`; exponential waiting times use
//! the inverse CDF `-ln(1 - U) / rate`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `replicate` under the key derived from `seed`.
pub fn replicate_stream(seed: u64, replicate: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

#[inline]
pub fn uniform(rng: &mut SimRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn exponential(rng: &mut SimRng, rate: f64) -> f64 {
    -(1.0 - uniform(rng)).ln() / rate
}

/// Index `i` with probability `weights[i] / total`, by a cumulative scan
/// with one uniform. Ties go to the lower index.
pub fn pick_weighted(rng: &mut SimRng, weights: &[f64], total: f64) -> usize {
    let target = uniform(rng) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    // rounding left `target` just above the accumulated sum
    last_positive
}
