//! Conditional-moment kernels of the truncated realized variance.
//!
//! For one interval with jump increment `m` and Gaussian part of variance
//! `σ²ᵢ`, the observed increment is `m + σᵢZ`. Then
//!
//! * `a(ε)` is the density of that increment at `±ε` (summed), and
//! * `b(ε) = E[(m + σᵢZ)² 1{|m + σᵢZ| ≤ ε}]`,
//!
//! so that `b'(ε) = ε² a(ε)`. The cMSE of the TRV has derivative
//! `ε² F(ε)` with `F = Σ aᵢ (ε² + 2Σ_{j≠i} b_j − 2 IV)`.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::models::PathRecord;
use crate::normal::{self, FRAC_1_SQRT_2PI};
use crate::quadrature::{self, QuadConfig};
use crate::sampling;
use crate::stats::KahanSum;

/// Arguments of the single-interval kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelInput {
    pub eps: f64,
    pub m: f64,
    pub sigma2_i: f64,
}

impl KernelInput {
    pub fn new(eps: f64, m: f64, sigma2_i: f64) -> Result<Self> {
        if !(sigma2_i > 0.0 && sigma2_i.is_finite()) {
            return Err(Error::invalid(format!("sigma2_i must be positive, got {sigma2_i}")));
        }
        if !(eps >= 0.0) {
            return Err(Error::invalid(format!("eps must be nonnegative, got {eps}")));
        }
        if !m.is_finite() {
            return Err(Error::invalid("jump increment must be finite"));
        }
        Ok(Self { eps, m, sigma2_i })
    }
}

pub fn a_coef(k: &KernelInput) -> f64 {
    kernel_a(k.eps, k.m, k.sigma2_i.sqrt())
}

pub fn b_coef(k: &KernelInput) -> f64 {
    kernel_b(k.eps, k.m, k.sigma2_i.sqrt())
}

/// `a(ε; m, σᵢ)` with the standard deviation `sd = σᵢ` passed directly.
#[inline]
pub fn kernel_a(eps: f64, m: f64, sd: f64) -> f64 {
    let two_var = 2.0 * sd * sd;
    let e1 = (-(eps - m).powi(2) / two_var).exp();
    let e2 = (-(eps + m).powi(2) / two_var).exp();
    (e1 + e2) * FRAC_1_SQRT_2PI / sd
}

/// `b(ε; m, σᵢ)` with the standard deviation `sd = σᵢ` passed directly.
#[inline]
pub fn kernel_b(eps: f64, m: f64, sd: f64) -> f64 {
    let var = sd * sd;
    if eps == f64::INFINITY {
        return m * m + var;
    }
    let two_var = 2.0 * var;
    let e1 = (-(eps - m).powi(2) / two_var).exp();
    let e2 = (-(eps + m).powi(2) / two_var).exp();
    let boundary = -(e1 * (eps + m) + e2 * (eps - m)) * sd * FRAC_1_SQRT_2PI;
    let mass = normal::interval_prob((m - eps) / sd, (m + eps) / sd);
    let b = boundary + (m * m + var) * mass;
    b.clamp(0.0, m * m + var)
}

/// `b(ε; 0, σᵢ) − σᵢ²`, free of cancellation: `−2σᵢ²(vφ(v) + Φ̄(v))`, `v = ε/σᵢ`.
#[inline]
pub fn kernel_b_zero_excess(eps: f64, sd: f64) -> f64 {
    let v = eps / sd;
    -2.0 * sd * sd * (v * normal::pdf(v) + normal::sf(v))
}

/// Inputs of the cMSE derivative kernel for constant volatility.
#[derive(Debug, Clone, Copy)]
pub struct CmseObjectiveInput<'a> {
    pub eps: f64,
    pub sigma: f64,
    pub jumps: &'a [f64],
    pub grid: SamplingGrid,
}

impl CmseObjectiveInput<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.jumps.len() != self.grid.n() {
            return Err(Error::invalid(format!(
                "jump vector has length {}, grid has {} intervals",
                self.jumps.len(),
                self.grid.n()
            )));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::invalid("eps must be nonnegative"));
        }
        Ok(())
    }
}

/// `F(ε; σ, m)` in one O(n) pass:
/// `(ε² + 2S_b − 2IV)·S_a − 2Σaᵢbᵢ` with compensated sums.
pub fn cmse_objective(input: &CmseObjectiveInput<'_>) -> Result<f64> {
    input.validate()?;
    let sd = input.sigma * input.grid.h().sqrt();
    let var = sd * sd;
    let eps = input.eps;
    let mut s_a = KahanSum::new();
    let mut b_excess = KahanSum::new();
    let mut s_ab = KahanSum::new();
    for &m in input.jumps {
        let a = kernel_a(eps, m, sd);
        let b = kernel_b(eps, m, sd);
        s_a.add(a);
        // S_b − IV accumulated term by term; IV = n·σ²h.
        b_excess.add(if m == 0.0 {
            kernel_b_zero_excess(eps, sd)
        } else {
            b - var
        });
        s_ab.add(a * b);
    }
    Ok((eps * eps + 2.0 * b_excess.value()) * s_a.value() - 2.0 * s_ab.value())
}

/// `F(·; σ, m)` prepared for repeated evaluation: zero jump increments are
/// grouped, so each evaluation costs O(#nonzero jumps).
#[derive(Debug, Clone)]
pub struct CmseProblem {
    sd: f64,
    zeros: usize,
    nonzero: Vec<f64>,
}

impl CmseProblem {
    pub fn new(sigma: f64, jumps: &[f64], grid: SamplingGrid) -> Result<Self> {
        CmseObjectiveInput {
            eps: 0.0,
            sigma,
            jumps,
            grid,
        }
        .validate()?;
        let nonzero: Vec<f64> = jumps.iter().copied().filter(|&m| m != 0.0).collect();
        Ok(Self {
            sd: sigma * grid.h().sqrt(),
            zeros: jumps.len() - nonzero.len(),
            nonzero,
        })
    }

    /// Standard deviation `σ√h` of one Gaussian increment.
    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn eval(&self, eps: f64) -> f64 {
        let sd = self.sd;
        let var = sd * sd;
        let z = self.zeros as f64;
        let a0 = kernel_a(eps, 0.0, sd);
        let b0 = kernel_b(eps, 0.0, sd);
        let mut s_a = KahanSum::new();
        let mut b_excess = KahanSum::new();
        let mut s_ab = KahanSum::new();
        s_a.add(z * a0);
        b_excess.add(z * kernel_b_zero_excess(eps, sd));
        s_ab.add(z * a0 * b0);
        for &m in &self.nonzero {
            let a = kernel_a(eps, m, sd);
            let b = kernel_b(eps, m, sd);
            s_a.add(a);
            b_excess.add(b - var);
            s_ab.add(a * b);
        }
        (eps * eps + 2.0 * b_excess.value()) * s_a.value() - 2.0 * s_ab.value()
    }
}

/// Finite-activity jump law: intensity λ, Gaussian jump sizes, and the
/// density mass at the origin `C(f) = f(0⁺) + f(0⁻)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaJumpLaw {
    pub lambda: f64,
    pub mu_jmp: f64,
    pub sigma_jmp: f64,
    pub c_f: f64,
}

impl FaJumpLaw {
    /// Merton law with `N(μ, σ_J²)` jump sizes; `C(f) = 2φ(μ/σ_J)/σ_J`.
    pub fn normal(lambda: f64, mu_jmp: f64, sigma_jmp: f64) -> Result<Self> {
        Self::new(
            lambda,
            mu_jmp,
            sigma_jmp,
            2.0 * normal::pdf(mu_jmp / sigma_jmp) / sigma_jmp,
        )
    }

    pub fn new(lambda: f64, mu_jmp: f64, sigma_jmp: f64, c_f: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("jump intensity must be >= 0, got {lambda}")));
        }
        if !(sigma_jmp > 0.0 && sigma_jmp.is_finite()) {
            return Err(Error::invalid(format!("sigma_jmp must be > 0, got {sigma_jmp}")));
        }
        if !(c_f >= 0.0) || !mu_jmp.is_finite() {
            return Err(Error::invalid("C(f) must be >= 0 and mu_jmp finite"));
        }
        Ok(Self {
            lambda,
            mu_jmp,
            sigma_jmp,
            c_f,
        })
    }
}

const POISSON_TAIL_CUT: f64 = 1e-12;

fn check_step(sigma: f64, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step h must be positive, got {h}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// `E[b₁(ε)]` for `X = σW + compound Poisson(λ, N(μ_J, σ_J²))`, by
/// conditioning on the jump count and integrating `b` against the Gaussian
/// law of the summed jump sizes.
pub fn expected_b1_merton(eps: f64, sigma: f64, h: f64, law: &FaJumpLaw) -> Result<f64> {
    Ok(sigma * sigma * h + expected_b1_merton_excess(eps, sigma, h, law)?)
}

/// `E[b₁(ε)] − σ²h`, the quantity that enters the Lévy MSE equation.
pub fn expected_b1_merton_excess(eps: f64, sigma: f64, h: f64, law: &FaJumpLaw) -> Result<f64> {
    check_step(sigma, h)?;
    if !(eps >= 0.0) {
        return Err(Error::invalid("eps must be nonnegative"));
    }
    let sd = sigma * h.sqrt();
    let var = sd * sd;
    let rate = law.lambda * h;
    let mut pk = (-rate).exp();
    let mut total = KahanSum::new();
    total.add(pk * kernel_b_zero_excess(eps, sd));
    if rate == 0.0 {
        return Ok(total.value());
    }
    let quad = QuadConfig {
        abs_tol: 1e-12 * var,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let mut cdf = pk;
    let mut k = 0u32;
    while 1.0 - cdf >= POISSON_TAIL_CUT && k < 10_000 {
        k += 1;
        pk *= rate / k as f64;
        cdf += pk;
        let mean = k as f64 * law.mu_jmp;
        let sd_k = (k as f64).sqrt() * law.sigma_jmp;
        // b(ε, m) is below (m² + σᵢ²)·Φ̄(10) once |m| > ε + 10σᵢ.
        let lo = (mean - 10.0 * sd_k).max(-eps - 10.0 * sd);
        let hi = (mean + 10.0 * sd_k).min(eps + 10.0 * sd);
        let integral = if lo < hi {
            quadrature::integrate(
                |m| kernel_b(eps, m, sd) * normal::pdf((m - mean) / sd_k) / sd_k,
                lo,
                hi,
                &[-eps, eps, mean],
                &quad,
            )
            .value
        } else {
            0.0
        };
        total.add(pk * (integral - var));
    }
    Ok(total.value())
}

/// Small-`h` expansion of `E[b₁(ε)]` for finite-activity jumps:
/// `σ²h − (2/√2π)σε√h·exp(−ε²/2σ²h) + λh·ε³·C(f)/3`.
///
/// Only meaningful for `ε → 0` with `ε/√h → ∞`.
pub fn expected_b1_asymptotic_fa(eps: f64, sigma: f64, h: f64, law: &FaJumpLaw) -> f64 {
    let var = sigma * sigma * h;
    var - 2.0 * FRAC_1_SQRT_2PI * sigma * eps * h.sqrt() * (-eps * eps / (2.0 * var)).exp()
        + law.lambda * h * eps.powi(3) * law.c_f / 3.0
}

/// Symmetric strictly stable jump law with Lévy density `C|x|^{−Y−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableLaw {
    pub y: f64,
    pub c: f64,
}

impl StableLaw {
    pub fn new(y: f64, c: f64) -> Result<Self> {
        if !(y > 0.0 && y < 2.0) {
            return Err(Error::invalid(format!("stable index must lie in (0,2), got {y}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("Levy constant must be positive, got {c}")));
        }
        Ok(Self { y, c })
    }

    /// Scale `s` of the characteristic function `exp(−t·s·|u|^Y)` implied by
    /// the Lévy density `C|x|^{−Y−1}`: `s = 2C·Γ(1−Y)cos(πY/2)/Y`
    /// (`= πC` at `Y = 1`).
    pub fn char_scale(&self) -> f64 {
        let y = self.y;
        if (y - 1.0).abs() < 1e-9 {
            return std::f64::consts::PI * self.c;
        }
        2.0 * self.c * libm::tgamma(1.0 - y) * (std::f64::consts::FRAC_PI_2 * y).cos() / y
    }
}

/// Small-`h` expansion of `E[b₁(ε)]` for symmetric stable jumps:
/// `σ²h − (2σ/√2π)√h·ε·exp(−ε²/2σ²h) + (2C/(2−Y))·h·ε^{2−Y}`.
pub fn expected_b1_asymptotic_stable(eps: f64, sigma: f64, h: f64, law: &StableLaw) -> f64 {
    let var = sigma * sigma * h;
    var - 2.0 * FRAC_1_SQRT_2PI * sigma * h.sqrt() * eps * (-eps * eps / (2.0 * var)).exp()
        + 2.0 * law.c / (2.0 - law.y) * h * eps.powf(2.0 - law.y)
}

/// Monte Carlo `E[b₁(ε)]` for `σW + J` with symmetric stable `J`.
///
/// Stable increments `J_h` are drawn once (Chambers–Mallows–Stuck); each
/// evaluation averages the closed-form conditional kernel `b(ε; J_h, σ√h)`
/// over them, so the estimate is smooth and monotone in `ε`.
#[derive(Debug, Clone)]
pub struct StableB1MonteCarlo {
    h: f64,
    jumps: Vec<f64>,
}

pub const DEFAULT_STABLE_SAMPLES: usize = 1_000_000;

impl StableB1MonteCarlo {
    pub fn new(law: &StableLaw, h: f64, samples: usize, seed: u64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("step h must be positive, got {h}")));
        }
        if samples == 0 {
            return Err(Error::invalid("need at least one Monte Carlo sample"));
        }
        let mut rng = sampling::rng_from_seed(seed);
        let scale = (law.char_scale() * h).powf(1.0 / law.y);
        let jumps = (0..samples)
            .map(|_| scale * sampling::symmetric_stable(&mut rng, law.y))
            .collect();
        Ok(Self { h, jumps })
    }

    pub fn samples(&self) -> usize {
        self.jumps.len()
    }

    pub fn expected_b1(&self, eps: f64, sigma: f64) -> f64 {
        sigma * sigma * self.h + self.excess(eps, sigma)
    }

    /// `E[b₁(ε)] − σ²h`.
    pub fn excess(&self, eps: f64, sigma: f64) -> f64 {
        let sd = sigma * self.h.sqrt();
        let var = sd * sd;
        let sum: KahanSum = self
            .jumps
            .iter()
            .map(|&m| {
                if m == 0.0 {
                    kernel_b_zero_excess(eps, sd)
                } else {
                    kernel_b(eps, m, sd) - var
                }
            })
            .collect();
        sum.value() / self.jumps.len() as f64
    }
}

/// Convenience wrapper: one-shot Monte Carlo `E[b₁(ε)]` for stable jumps.
pub fn expected_b1_stable_mc(eps: f64, sigma: f64, h: f64, law: &StableLaw, samples: usize, seed: u64) -> Result<f64> {
    check_step(sigma, h)?;
    Ok(StableB1MonteCarlo::new(law, h, samples, seed)?.expected_b1(eps, sigma))
}

/// Plain Monte Carlo `E[(σW_h + J_h)²]` under a Merton law; used as an
/// independent check of the quadrature at large thresholds.
pub fn second_moment_merton_mc(sigma: f64, h: f64, law: &FaJumpLaw, draws: usize, seed: u64) -> (f64, f64) {
    use rand_distr::Poisson;
    let mut rng = sampling::rng_from_seed(seed);
    let poisson = (law.lambda * h > 0.0).then(|| Poisson::new(law.lambda * h).expect("rate > 0"));
    let mut acc = crate::stats::Welford::new();
    for _ in 0..draws {
        let z: f64 = StandardNormal.sample(&mut rng);
        let mut x = sigma * h.sqrt() * z;
        if let Some(p) = &poisson {
            let k = p.sample(&mut rng) as u64;
            for _ in 0..k {
                let g: f64 = StandardNormal.sample(&mut rng);
                x += law.mu_jmp + law.sigma_jmp * g;
            }
        }
        acc.push(x * x);
    }
    (acc.mean(), acc.std_err())
}

/// Number of misclassified intervals at threshold `ε`: continuous
/// increments above `ε` plus jump intervals at or below it.
pub fn loss_count(path: &PathRecord, eps: f64) -> Result<usize> {
    if !(eps >= 0.0) {
        return Err(Error::invalid("eps must be nonnegative"));
    }
    if path.is_infinite_activity() {
        return Err(Error::invalid(
            "loss is undefined for infinite-activity paths (jump counts unavailable)",
        ));
    }
    Ok(path
        .dx
        .iter()
        .zip(&path.dn)
        .filter(|&(&dx, &dn)| {
            let kept = dx.abs() <= eps;
            (!kept && dn == 0) || (kept && dn > 0)
        })
        .count())
}
