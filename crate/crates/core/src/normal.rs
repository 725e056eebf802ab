//! Standard normal density and tail probabilities.
//!
//! Tails go through `erfc` so that probabilities far out in either tail keep
//! full relative precision; `exp` of large negative arguments underflows to
//! zero, never NaN.

use std::f64::consts::FRAC_1_SQRT_2;

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail Φ̄(x) = P(Z > x).
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// P(l ≤ Z ≤ u) for l ≤ u, evaluated on whichever tail keeps precision.
pub fn interval_prob(l: f64, u: f64) -> f64 {
    if u <= l {
        return 0.0;
    }
    let p = if l >= 0.0 {
        sf(l) - sf(u)
    } else if u <= 0.0 {
        sf(-u) - sf(-l)
    } else {
        1.0 - sf(u) - sf(-l)
    };
    p.max(0.0)
}

/// ∫₀ˣ φ(s) ds for x ≥ 0.
#[inline]
pub fn half_mass(x: f64) -> f64 {
    0.5 - sf(x)
}
