//! Integrated-variance estimators.
//!
//! Every estimator returns `IV̂` over the whole horizon `[0, T]`, not an
//! annualized `σ̂²`; divide by `T` for the latter.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::kernels::{self, CmseProblem};
use crate::models::PathRecord;
use crate::solvers::{self, RootConfig, SigmaSource, ThresholdRule};
use crate::stats::KahanSum;

/// Outcome of one estimator on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub iv_hat: f64,
    /// Threshold of the last truncation pass; `None` for RV, BV, MinRV, MedRV.
    pub eps_final: Option<f64>,
    /// Number of truncation passes, the confirming pass included.
    pub iterations: u32,
    /// Misclassified intervals at `eps_final`; `None` without jump counts.
    pub loss: Option<usize>,
    /// Increments with `|ΔX| ≤ eps_final` (all of them if not truncating).
    pub kept: usize,
    /// False when an iteration hit `max_iter` before its stopping rule.
    pub converged: bool,
    /// True when the root solver failed and a fallback threshold was used.
    pub fallback: bool,
}

impl EstimateReport {
    fn plain(iv_hat: f64, n: usize) -> Self {
        Self {
            iv_hat,
            eps_final: None,
            iterations: 1,
            loss: None,
            kept: n,
            converged: true,
            fallback: false,
        }
    }

    /// Fills `loss` from the path's jump counts; leaves it empty for
    /// infinite-activity paths or non-truncating estimators.
    pub fn with_loss(mut self, path: &PathRecord) -> Self {
        self.loss = match self.eps_final {
            Some(eps) if !path.is_infinite_activity() => kernels::loss_count(path, eps).ok(),
            _ => None,
        };
        self
    }
}

pub fn rv(dx: &[f64]) -> f64 {
    dx.iter().map(|x| x * x).collect::<KahanSum>().value()
}

/// `(π/2)·Σ|ΔX_i||ΔX_{i+1}|`.
pub fn bv(dx: &[f64]) -> f64 {
    let s: KahanSum = dx.windows(2).map(|w| w[0].abs() * w[1].abs()).collect();
    0.5 * PI * s.value()
}

/// `π/(π−2)·n/(n−1)·Σ min(|ΔX_i|, |ΔX_{i+1}|)²`.
pub fn minrv(dx: &[f64]) -> Result<f64> {
    let n = dx.len();
    if n < 2 {
        return Err(Error::invalid("MinRV needs at least two increments"));
    }
    let s: KahanSum = dx.windows(2).map(|w| w[0].abs().min(w[1].abs()).powi(2)).collect();
    Ok(PI / (PI - 2.0) * n as f64 / (n - 1) as f64 * s.value())
}

/// `π/(π+6−4√3)·n/(n−2)·Σ med(|ΔX_{i−1}|, |ΔX_i|, |ΔX_{i+1}|)²`.
pub fn medrv(dx: &[f64]) -> Result<f64> {
    let n = dx.len();
    if n < 3 {
        return Err(Error::invalid("MedRV needs at least three increments"));
    }
    let s: KahanSum = dx
        .windows(3)
        .map(|w| {
            let (a, b, c) = (w[0].abs(), w[1].abs(), w[2].abs());
            a.max(b).min(a.min(b).max(c)).powi(2)
        })
        .collect();
    Ok(PI / (PI + 6.0 - 4.0 * 3f64.sqrt()) * n as f64 / (n - 2) as f64 * s.value())
}

/// `Σ ΔX_i² 1{|ΔX_i| ≤ ε}`.
pub fn trv(dx: &[f64], eps: f64) -> EstimateReport {
    let mut s = KahanSum::new();
    let mut kept = 0;
    for &x in dx {
        if x.abs() <= eps {
            s.add(x * x);
            kept += 1;
        }
    }
    EstimateReport {
        eps_final: Some(eps),
        kept,
        ..EstimateReport::plain(s.value(), dx.len())
    }
}

/// `(π/2)·Σ|ΔX_i||ΔX_{i+1}| 1{|ΔX_i| ≤ ε} 1{|ΔX_{i+1}| ≤ ε}`.
pub fn tbv(dx: &[f64], eps: f64) -> EstimateReport {
    let s: KahanSum = dx
        .windows(2)
        .filter(|w| w[0].abs() <= eps && w[1].abs() <= eps)
        .map(|w| w[0].abs() * w[1].abs())
        .collect();
    EstimateReport {
        eps_final: Some(eps),
        kept: dx.iter().filter(|x| x.abs() <= eps).count(),
        ..EstimateReport::plain(0.5 * PI * s.value(), dx.len())
    }
}

/// Truncated statistic recomputed at each pass of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Trv,
    Tbv,
}

impl Statistic {
    fn eval(self, dx: &[f64], eps: f64) -> EstimateReport {
        match self {
            Statistic::Trv => trv(dx, eps),
            Statistic::Tbv => tbv(dx, eps),
        }
    }
}

/// Starting volatility `σ̂₀` (annualized, i.e. `√(IV̂/T)`).
pub fn initial_sigma(dx: &[f64], grid: SamplingGrid, source: SigmaSource) -> Result<f64> {
    let t = grid.horizon();
    let iv = match source {
        SigmaSource::Rv => rv(dx),
        SigmaSource::Bv => bv(dx),
        SigmaSource::TrvBv => {
            let sigma_bv = (bv(dx) / t).sqrt();
            trv(dx, solvers::asymptotic_threshold(2.0, sigma_bv, grid.h())?).iv_hat
        }
        SigmaSource::Truth => {
            return Err(Error::invalid(
                "ground-truth volatility is not observable from increments",
            ));
        }
    };
    Ok((iv / t).sqrt())
}

/// True when thresholds `a` and `b` keep the same increments.
fn same_kept_set(dx: &[f64], a: f64, b: f64) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    !dx.iter().any(|x| {
        let v = x.abs();
        v > lo && v <= hi
    })
}

/// Alternates `ε ← rule(σ̂)` and `σ̂² ← stat(ε)/T`.
///
/// With `tol > 0` the iteration stops once `|σ̂_k − σ̂_{k−1}|/σ̂_{k−1} ≤ tol`;
/// with `tol = 0` once the kept set stops changing (for the first pass: once
/// `σ̂₁ = σ̂₀` exactly). `max_iter = 1` is the single-pass estimator.
pub fn iterate_rule(
    dx: &[f64],
    grid: SamplingGrid,
    rule: &ThresholdRule,
    stat: Statistic,
    tol: f64,
    max_iter: u32,
) -> Result<EstimateReport> {
    iterate_rule_traced(dx, grid, rule, stat, tol, max_iter).map(|(r, _)| r)
}

/// As [`iterate_rule`], also returning `σ̂₀, σ̂₁, …, σ̂_N`.
pub fn iterate_rule_traced(
    dx: &[f64],
    grid: SamplingGrid,
    rule: &ThresholdRule,
    stat: Statistic,
    tol: f64,
    max_iter: u32,
) -> Result<(EstimateReport, Vec<f64>)> {
    if !(tol >= 0.0) || max_iter == 0 {
        return Err(Error::invalid("need tol >= 0 and max_iter >= 1"));
    }
    let t = grid.horizon();
    let mut sigma = initial_sigma(dx, grid, rule.sigma_source())?;
    let mut trace = vec![sigma];
    let mut prev_eps: Option<f64> = None;
    for k in 1..=max_iter {
        let eps = rule.threshold(sigma, grid)?;
        let mut report = stat.eval(dx, eps);
        let next = (report.iv_hat / t).sqrt();
        trace.push(next);
        report.iterations = k;
        let stop = max_iter == 1
            || if tol == 0.0 {
                match prev_eps {
                    Some(p) => same_kept_set(dx, p, eps),
                    None => next == sigma,
                }
            } else {
                (next - sigma).abs() <= tol * sigma
            };
        if stop {
            return Ok((report, trace));
        }
        if k == max_iter {
            report.converged = false;
            return Ok((report, trace));
        }
        sigma = next;
        prev_eps = Some(eps);
    }
    unreachable!("loop returns on its last pass")
}

/// Settings of the root-of-`F` iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewMethodOptions {
    pub tol: f64,
    pub max_iter: u32,
    pub initial: SigmaSource,
}

impl Default for NewMethodOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 100,
            initial: SigmaSource::TrvBv,
        }
    }
}

impl NewMethodOptions {
    /// One root solve and one TRV, no refinement.
    pub fn single() -> Self {
        Self {
            max_iter: 1,
            ..Self::default()
        }
    }
}

/// Root-of-`F` threshold with estimated volatility and jumps.
///
/// Starts from `σ̂₀` and `m̂ = 0`, solves `F(ε; σ̂, m̂) = 0`, sets
/// `σ̂² = TRV(ε)/T` and `m̂_i = ΔX_i 1{|ΔX_i| > ε}`, and repeats until the
/// relative change of `σ̂` is at most `tol`. If a root solve fails the
/// previous threshold (or `√(2σ̂²h ln(1/h))` on the first pass) is used and
/// the report is flagged.
pub fn new_method(dx: &[f64], grid: SamplingGrid, opts: &NewMethodOptions) -> Result<EstimateReport> {
    if !(opts.tol >= 0.0) || opts.max_iter == 0 {
        return Err(Error::invalid("need tol >= 0 and max_iter >= 1"));
    }
    if dx.len() != grid.n() {
        return Err(Error::invalid("increment count does not match the grid"));
    }
    let t = grid.horizon();
    let h = grid.h();
    let mut sigma = initial_sigma(dx, grid, opts.initial)?;
    let mut jumps = vec![0.0; dx.len()];
    let mut last_eps: Option<f64> = None;
    for k in 1..=opts.max_iter {
        let problem = CmseProblem::new(sigma, &jumps, grid)?;
        let cfg = RootConfig::for_scale(sigma, h)?;
        let (eps, fallback) = match solvers::solve_root_f_problem(&problem, &cfg) {
            Ok(e) => (e, false),
            Err(e) if e.is_numeric() => match last_eps {
                Some(prev) => (prev, true),
                None => (solvers::asymptotic_threshold(2.0, sigma, h)?, true),
            },
            Err(e) => return Err(e),
        };
        let mut report = trv(dx, eps);
        report.iterations = k;
        report.fallback = fallback;
        let next = (report.iv_hat / t).sqrt();
        let stop = opts.max_iter == 1 || fallback || (next - sigma).abs() <= opts.tol * sigma;
        if stop {
            return Ok(report);
        }
        if k == opts.max_iter {
            report.converged = false;
            return Ok(report);
        }
        for (m, &x) in jumps.iter_mut().zip(dx) {
            *m = if x.abs() > eps { x } else { 0.0 };
        }
        sigma = next;
        last_eps = Some(eps);
    }
    unreachable!("loop returns on its last pass")
}

/// Infeasible benchmark: root of `F` at the true average volatility
/// `√(IV/T)` and the true jump increments, then TRV.
pub fn oracle(path: &PathRecord, grid: SamplingGrid) -> Result<EstimateReport> {
    if path.n() != grid.n() {
        return Err(Error::invalid("path length does not match the grid"));
    }
    let sigma = (path.iv_total / grid.horizon()).sqrt();
    let problem = CmseProblem::new(sigma, &path.m, grid)?;
    let eps = solvers::solve_root_f_problem(&problem, &RootConfig::for_scale(sigma, grid.h())?)?;
    Ok(trv(&path.dx, eps))
}

/// Choice of `M_i` in the consistency indicator `r_i = 2M_i h ln(1/h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpotBound {
    /// Mean spot variance over the interval, `iv_i / h`.
    TrueSpot,
    Constant(f64),
}

/// Fraction of intervals where `1{ΔX_i² ≤ (1+η)r_i}` disagrees with
/// `1{ΔN_i = 0}`.
pub fn consistency_indicator_check(path: &PathRecord, grid: SamplingGrid, eta: f64, bound: SpotBound) -> Result<f64> {
    if path.is_infinite_activity() {
        return Err(Error::invalid("consistency check needs jump counts (finite activity)"));
    }
    if path.n() != grid.n() {
        return Err(Error::invalid("path length does not match the grid"));
    }
    if !(eta >= 0.0) {
        return Err(Error::invalid("eta must be >= 0"));
    }
    let h = grid.h();
    let log_inv_h = grid.log_inv_h();
    let wrong = (0..path.n())
        .filter(|&i| {
            let spot = match bound {
                SpotBound::TrueSpot => path.iv_i[i] / h,
                SpotBound::Constant(m) => m,
            };
            let r = 2.0 * spot * h * log_inv_h;
            let small = path.dx[i] * path.dx[i] <= (1.0 + eta) * r;
            small != (path.dn[i] == 0)
        })
        .count();
    Ok(wrong as f64 / path.n() as f64)
}
