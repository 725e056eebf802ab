//! Random-number plumbing shared by the simulators and Monte Carlo kernels.
//!
//! Every stream is a ChaCha8 generator seeded from a 64-bit value. Per-path
//! seeds are `mix(base) ⊕ index`, so path `i` of an experiment is the same
//! no matter which worker draws it.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

pub type PathRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of path `index` in an experiment with base seed `base`.
pub fn path_seed(base: u64, index: u64) -> u64 {
    mix64(base) ^ index
}

pub fn rng_from_seed(seed: u64) -> PathRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric `y`-stable variate with characteristic function `exp(-|u|^y)`
/// (Chambers–Mallows–Stuck).
pub fn symmetric_stable<R: Rng + ?Sized>(rng: &mut R, y: f64) -> f64 {
    let v = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
    if (y - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    let a = (y * v).sin() / v.cos().powf(1.0 / y);
    let b = (((1.0 - y) * v).cos() / w).powf((1.0 - y) / y);
    a * b
}
