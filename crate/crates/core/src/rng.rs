//! Seeded random streams and the seed-splitting rule used for replications
//! and multi-start fits.
//!
//! A child seed is `splitmix64(parent ^ splitmix64(index + 1))`, so every
//! `(master_seed, index)` pair maps to a fixed, well-mixed stream seed.
//! Streams are ChaCha8.

use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};

pub use rand_chacha::ChaCha8Rng as SimRng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of child stream `index` from `parent`.
pub fn split_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(1)))
}

pub fn stream(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Uniform draw on `[0, 1)` with 53 bits of precision.
pub fn uniform(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on `[lo, hi)`.
pub fn uniform_in(rng: &mut dyn RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Bernoulli(p) draw.
pub fn bernoulli(rng: &mut dyn RngCore, p: f64) -> bool {
    uniform(rng) < p
}

/// Draw from the symmetric Dirichlet(1, .., 1) on `dim` coordinates.
pub fn dirichlet_ones(rng: &mut dyn RngCore, dim: usize) -> Vec<f64> {
    let mut draws: Vec<f64> = (0..dim)
        .map(|_| {
            // 1 - u lies in (0, 1], so the exponential draw is finite
            -libm::log(1.0 - uniform(rng))
        })
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter_mut().for_each(|x| *x /= total);
    } else {
        draws.iter_mut().for_each(|x| *x = 1.0 / dim as f64);
    }
    draws
}
