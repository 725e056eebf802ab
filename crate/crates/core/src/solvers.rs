//! Threshold solvers: the root of `F`, the Lévy MSE equation, `v_n`, `w_h`
//! and the closed-form asymptotic thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::kernels::{self, CmseObjectiveInput, CmseProblem, FaJumpLaw, StableB1MonteCarlo};
use crate::normal;

/// Bracket and stopping rules for the threshold root-finders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub scan_points: usize,
    pub rel_tol: f64,
    pub max_iter: u32,
}

pub const DEFAULT_SCAN_POINTS: usize = 512;
pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: u32 = 200;

impl RootConfig {
    pub fn new(bracket_lo: f64, bracket_hi: f64) -> Result<Self> {
        let cfg = Self {
            bracket_lo,
            bracket_hi,
            scan_points: DEFAULT_SCAN_POINTS,
            rel_tol: DEFAULT_REL_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default bracket `[0.25·σ√h, 20·σ√(h·ln(1/h))]`.
    ///
    /// For coarse grids (`ln(1/h) < 1`) the upper end is kept at `20σ√h`
    /// so that the bracket never collapses.
    pub fn for_scale(sigma: f64, h: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("step h must be positive, got {h}")));
        }
        let sd = sigma * h.sqrt();
        let log_inv_h = (-h.ln()).max(1.0);
        Self::new(0.25 * sd, 20.0 * sd * log_inv_h.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bracket_lo >= 0.0 && self.bracket_lo < self.bracket_hi && self.bracket_hi.is_finite()) {
            return Err(Error::invalid(format!(
                "invalid bracket [{}, {}]",
                self.bracket_lo, self.bracket_hi
            )));
        }
        if self.scan_points < 2 {
            return Err(Error::invalid("scan_points must be >= 2"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be positive"));
        }
        Ok(())
    }

    /// Scan abscissae: geometric from `bracket_lo` (or from `1e-6·bracket_hi`
    /// after a leading zero when `bracket_lo = 0`) to `bracket_hi`.
    pub fn scan_grid(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.scan_points + 1);
        let start = if self.bracket_lo > 0.0 {
            self.bracket_lo
        } else {
            pts.push(0.0);
            self.bracket_hi * 1e-6
        };
        let ratio = (self.bracket_hi / start).ln() / (self.scan_points - 1) as f64;
        pts.extend((0..self.scan_points).map(|k| start * (ratio * k as f64).exp()));
        if let Some(last) = pts.last_mut() {
            *last = self.bracket_hi;
        }
        pts
    }
}

fn eval_checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_nan() {
        Err(Error::NonFinite { at: x })
    } else {
        Ok(v)
    }
}

/// Bisection on `[lo, hi]` where `f(lo) < 0 ≤ f(hi)` or `f(lo) > 0 ≥ f(hi)`.
/// Points with `f = 0` are treated as lying on the `hi` side, so the search
/// converges to the left edge of any zero plateau.
fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, f_lo: f64, cfg: &RootConfig) -> Result<f64> {
    let lo_negative = f_lo < 0.0;
    for _ in 0..cfg.max_iter {
        if hi - lo <= cfg.rel_tol * hi {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        let fm = eval_checked(f, mid)?;
        if fm != 0.0 && (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= cfg.rel_tol * hi {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::NonConvergence {
            iterations: cfg.max_iter as usize,
        })
    }
}

/// Smallest sign change of `f` on the geometric scan of `cfg`, refined by
/// bisection. An exact zero at a scan point after a nonzero value counts as
/// a crossing (this is how `F` behaves once its terms underflow).
pub fn first_root<F: Fn(f64) -> f64>(f: F, cfg: &RootConfig) -> Result<f64> {
    cfg.validate()?;
    let grid = cfg.scan_grid();
    let mut prev_x = grid[0];
    let mut prev_f = eval_checked(&f, prev_x)?;
    if prev_f == 0.0 {
        return Ok(prev_x);
    }
    for &x in &grid[1..] {
        let fx = eval_checked(&f, x)?;
        if fx == 0.0 || (fx < 0.0) != (prev_f < 0.0) {
            return bisect(&f, prev_x, x, prev_f, cfg);
        }
        prev_x = x;
        prev_f = fx;
    }
    Err(Error::NoSignChange {
        lo: cfg.bracket_lo,
        hi: cfg.bracket_hi,
    })
}

/// `(ε, F(ε))` on every scan point, for diagnosing bracket problems.
pub fn scan_root_f(input: &CmseObjectiveInput<'_>, cfg: &RootConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let problem = CmseProblem::new(input.sigma, input.jumps, input.grid)?;
    Ok(cfg.scan_grid().into_iter().map(|e| (e, problem.eval(e))).collect())
}

/// Root of `F(ε; σ, m)`; the `eps` field of `input` is ignored.
///
/// Returns the smallest crossing found by the scan. `F` is not known to
/// have a unique root at finite `h`, so no global optimality is claimed.
pub fn solve_root_f(input: &CmseObjectiveInput<'_>, cfg: &RootConfig) -> Result<f64> {
    let problem = CmseProblem::new(input.sigma, input.jumps, input.grid)?;
    solve_root_f_problem(&problem, cfg)
}

pub fn solve_root_f_problem(problem: &CmseProblem, cfg: &RootConfig) -> Result<f64> {
    first_root(|e| problem.eval(e), cfg)
}

/// Root of `g(ε) = ε² + 2(n−1)E[b₁(ε)] − 2IV`, with `E[b₁] − σ²h` supplied
/// by `excess`. `g` is strictly increasing, so plain bisection on the
/// bracket is used.
pub fn solve_levy_mse_with<D: Fn(f64) -> f64>(
    excess: D,
    sigma: f64,
    grid: SamplingGrid,
    cfg: &RootConfig,
) -> Result<f64> {
    cfg.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let h = grid.h();
    let k = 2.0 * (grid.n() as f64 - 1.0);
    // IV = nσ²h, so g = ε² − 2σ²h + 2(n−1)(E[b₁] − σ²h).
    let g = |e: f64| e * e - 2.0 * sigma * sigma * h + k * excess(e);
    let g_lo = eval_checked(&g, cfg.bracket_lo)?;
    let g_hi = eval_checked(&g, cfg.bracket_hi)?;
    if g_lo >= 0.0 || g_hi <= 0.0 {
        return Err(Error::NoSignChange {
            lo: cfg.bracket_lo,
            hi: cfg.bracket_hi,
        });
    }
    bisect(&g, cfg.bracket_lo, cfg.bracket_hi, g_lo, cfg)
}

/// MSE-optimal threshold for `σW + compound Poisson` with Gaussian jump
/// sizes, `E[b₁]` by quadrature.
pub fn solve_levy_mse(sigma: f64, grid: SamplingGrid, law: &FaJumpLaw, cfg: &RootConfig) -> Result<f64> {
    let h = grid.h();
    let cell = std::cell::Cell::new(None);
    let result = solve_levy_mse_with(
        |e| match kernels::expected_b1_merton_excess(e, sigma, h, law) {
            Ok(v) => v,
            Err(err) => {
                cell.set(Some(err));
                f64::NAN
            }
        },
        sigma,
        grid,
        cfg,
    );
    match cell.into_inner() {
        Some(err) => Err(err),
        None => result,
    }
}

/// MSE-optimal threshold for `σW + symmetric stable`, `E[b₁]` by Monte Carlo
/// over the pre-drawn increments of `mc`.
pub fn solve_levy_mse_stable(sigma: f64, grid: SamplingGrid, mc: &StableB1MonteCarlo, cfg: &RootConfig) -> Result<f64> {
    solve_levy_mse_with(|e| mc.excess(e, sigma), sigma, grid, cfg)
}

fn vn_equation(v: f64, n: f64) -> f64 {
    v * v + 4.0 * (n - 1.0) * (-v * normal::pdf(v) + normal::half_mass(v)) - 2.0 * n
}

/// `v_n`: the root-of-`F` threshold in units of `σ̂₀√h` when no jumps are
/// assumed, i.e. the root of
/// `v² + 4(n−1)(−vφ(v) + Φ(v) − ½) − 2n` on `[0, 10]`.
pub fn solve_vn(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("v_n needs n >= 2, got {n}")));
    }
    let n = n as f64;
    let (mut lo, mut hi) = (0.0_f64, 10.0_f64);
    for _ in 0..200 {
        if hi - lo <= 1e-13 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if vn_equation(mid, n) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `w_h` with `e^{−w²}/(w·h) = √π/2`.
///
/// Fixed point on `x = w²`: `x ← ln(2/(√π h)) − ½ln x` from `x₀ = ln(1/h)`.
/// For `h` close to 1 the map stops contracting; bisection on the monotone
/// `x + ½ln x − ln(2/(√π h))` takes over.
pub fn solve_wh(h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::invalid(format!("w_h needs 0 < h < 1, got {h}")));
    }
    let c = (2.0 / (std::f64::consts::PI.sqrt() * h)).ln();
    let mut x = -h.ln();
    for _ in 0..500 {
        if !(x > 0.0) {
            break;
        }
        let next = c - 0.5 * x.ln();
        if (next - x).abs() < 1e-14 {
            return Ok(next.sqrt());
        }
        x = next;
    }
    let phi = |x: f64| x + 0.5 * x.ln() - c;
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, c.max(1.0) + 1.0);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).sqrt())
}

/// `√(factor·σ²·h·ln(1/h))`; factor 2 and 3 are the 2mc and 3mc rules,
/// `2 − Y` the stable-jump rate.
pub fn asymptotic_threshold(factor: f64, sigma: f64, h: f64) -> Result<f64> {
    if !(factor > 0.0) {
        return Err(Error::invalid(format!("factor must be positive, got {factor}")));
    }
    check_scale(sigma, h)?;
    Ok((factor * sigma * sigma * h * -h.ln()).sqrt())
}

/// `σ·w_h·√(2h)`.
pub fn mc2_threshold(sigma: f64, h: f64) -> Result<f64> {
    check_scale(sigma, h)?;
    Ok(sigma * solve_wh(h)? * (2.0 * h).sqrt())
}

fn check_scale(sigma: f64, h: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::invalid(format!("need 0 < h < 1, got {h}")));
    }
    Ok(())
}

/// Where an iteration takes its starting volatility from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    /// Realized variance.
    Rv,
    /// Bipower variation.
    Bv,
    /// TRV at `√(2σ̂²_BV h ln(1/h))`.
    TrvBv,
    /// Ground truth (oracle only).
    Truth,
}

/// Where the jump vector of a root-of-`F` rule comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpsSource {
    Zero,
    Estimated,
    Truth,
}

/// Threshold-selection policy as a function of the current volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdRule {
    Fixed {
        eps: f64,
    },
    /// `c·h^ω·σ̂`.
    PowerBv {
        c: f64,
        omega: f64,
    },
    /// `√(factor·σ̂²h ln(1/h))`.
    AsympMc {
        factor: f64,
        #[serde(default = "default_rv")]
        sigma_source: SigmaSource,
    },
    /// `σ̂·w_h·√(2h)`.
    Mc2 {
        #[serde(default = "default_rv")]
        sigma_source: SigmaSource,
    },
    RootF {
        sigma_source: SigmaSource,
        jumps_source: JumpsSource,
    },
}

fn default_rv() -> SigmaSource {
    SigmaSource::Rv
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdRule::Fixed { eps } if !(eps >= 0.0) => {
                Err(Error::invalid(format!("fixed threshold must be >= 0, got {eps}")))
            }
            ThresholdRule::PowerBv { c, omega } if !(c > 0.0 && omega > 0.0 && omega < 0.5) => Err(Error::invalid(
                format!("power rule needs c > 0 and omega in (0, 1/2), got c={c}, omega={omega}"),
            )),
            ThresholdRule::AsympMc { factor, .. } if factor != 2.0 && factor != 3.0 => Err(Error::invalid(format!(
                "asymptotic factor must be 2 or 3, got {factor}"
            ))),
            _ => Ok(()),
        }
    }

    /// Starting volatility source for iterations of this rule.
    pub fn sigma_source(&self) -> SigmaSource {
        match *self {
            ThresholdRule::Fixed { .. } | ThresholdRule::PowerBv { .. } => SigmaSource::Bv,
            ThresholdRule::AsympMc { sigma_source, .. }
            | ThresholdRule::Mc2 { sigma_source }
            | ThresholdRule::RootF { sigma_source, .. } => sigma_source,
        }
    }

    /// Threshold at volatility `sigma`. Root-of-`F` rules are only
    /// available here with zero jumps (`v_n·σ√h`); estimated or true jumps
    /// need the path and go through the estimators.
    pub fn threshold(&self, sigma: f64, grid: SamplingGrid) -> Result<f64> {
        self.validate()?;
        let h = grid.h();
        match *self {
            ThresholdRule::Fixed { eps } => Ok(eps),
            ThresholdRule::PowerBv { c, omega } => Ok(c * h.powf(omega) * sigma),
            ThresholdRule::AsympMc { factor, .. } => asymptotic_threshold(factor, sigma, h),
            ThresholdRule::Mc2 { .. } => mc2_threshold(sigma, h),
            ThresholdRule::RootF {
                jumps_source: JumpsSource::Zero,
                ..
            } => Ok(solve_vn(grid.n())? * sigma * h.sqrt()),
            ThresholdRule::RootF { .. } => Err(Error::invalid("root-of-F rule with a jump vector needs path data")),
        }
    }
}
