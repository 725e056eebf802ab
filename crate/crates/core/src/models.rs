//! Seeded path simulators.
//!
//! Every simulator draws from a single ChaCha8 stream seeded by the caller,
//! so `(spec, grid, seed)` determines the path bit for bit.

use std::io::{Read, Write};

use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::kernels::FaJumpLaw;
use crate::sampling::{self, PathRng};
use crate::stats::KahanSum;

/// Jump-count value used when counts are undefined (infinite activity).
pub const DN_SENTINEL: i64 = -1;

/// Compound Poisson jumps with `N(mu_jmp, sigma_jmp²)` sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MertonJumps {
    pub lambda: f64,
    pub mu_jmp: f64,
    pub sigma_jmp: f64,
}

impl MertonJumps {
    pub fn law(&self) -> Result<FaJumpLaw> {
        FaJumpLaw::normal(self.lambda, self.mu_jmp, self.sigma_jmp)
    }
}

fn default_substeps() -> u32 {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `σW + compound Poisson`.
    Merton { sigma: f64, jumps: MertonJumps },
    /// Heston variance (full-truncation Euler on `substeps` per interval)
    /// plus independent Merton jumps.
    HestonJump {
        mu: f64,
        kappa: f64,
        theta: f64,
        xi: f64,
        rho: f64,
        v0: f64,
        jumps: MertonJumps,
        #[serde(default = "default_substeps")]
        substeps: u32,
    },
    /// `a·t + σW + σ_J·B(S_t) + θ·S_t` with a gamma subordinator `S`
    /// (`E[S_t] = t`, `Var S_t = κt`).
    GaussVg {
        a_drift: f64,
        sigma: f64,
        sigma_jmp: f64,
        theta_vg: f64,
        kappa_vg: f64,
    },
    /// `σW + J` with `J` symmetric `y`-stable, `E[e^{iuJ_t}] = e^{−scale·t·|u|^y}`.
    GaussStable { sigma: f64, y: f64, scale: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Merton { sigma, jumps } => {
                positive("sigma", sigma)?;
                jumps.law().map(|_| ())
            }
            ModelSpec::HestonJump {
                mu,
                kappa,
                theta,
                xi,
                rho,
                v0,
                jumps,
                substeps,
            } => {
                positive("kappa", kappa)?;
                positive("theta", theta)?;
                positive("xi", xi)?;
                positive("v0", v0)?;
                if !mu.is_finite() {
                    return Err(Error::invalid("mu must be finite"));
                }
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(Error::invalid(format!("rho must lie in [-1, 1], got {rho}")));
                }
                if substeps == 0 {
                    return Err(Error::invalid("substeps must be >= 1"));
                }
                jumps.law().map(|_| ())
            }
            ModelSpec::GaussVg {
                a_drift,
                sigma,
                sigma_jmp,
                theta_vg,
                kappa_vg,
            } => {
                positive("sigma", sigma)?;
                positive("kappa_vg", kappa_vg)?;
                if !(sigma_jmp >= 0.0) || !a_drift.is_finite() || !theta_vg.is_finite() {
                    return Err(Error::invalid("invalid VG parameters"));
                }
                Ok(())
            }
            ModelSpec::GaussStable { sigma, y, scale } => {
                positive("sigma", sigma)?;
                positive("scale", scale)?;
                if !(y > 0.0 && y < 2.0) {
                    return Err(Error::invalid(format!("stable index must lie in (0, 2), got {y}")));
                }
                Ok(())
            }
        }
    }

    /// Constant diffusive volatility, if the model has one.
    pub fn constant_sigma(&self) -> Option<f64> {
        match *self {
            ModelSpec::Merton { sigma, .. }
            | ModelSpec::GaussVg { sigma, .. }
            | ModelSpec::GaussStable { sigma, .. } => Some(sigma),
            ModelSpec::HestonJump { .. } => None,
        }
    }
}

/// One simulated path together with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub dx: Vec<f64>,
    pub m: Vec<f64>,
    pub dn: Vec<i64>,
    pub iv_i: Vec<f64>,
    pub iv_total: f64,
    pub seed: u64,
}

impl PathRecord {
    pub fn from_parts(dx: Vec<f64>, m: Vec<f64>, dn: Vec<i64>, iv_i: Vec<f64>, seed: u64) -> Result<Self> {
        let n = dx.len();
        if n == 0 || m.len() != n || dn.len() != n || iv_i.len() != n {
            return Err(Error::invalid("path vectors must be nonempty and of equal length"));
        }
        if let Some(bad) = iv_i.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("iv_i must be positive, found {bad}")));
        }
        if dx.iter().chain(&m).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { at: f64::NAN });
        }
        let iv_total = iv_i.iter().copied().collect::<KahanSum>().value();
        Ok(Self {
            dx,
            m,
            dn,
            iv_i,
            iv_total,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.dx.len()
    }

    pub fn is_infinite_activity(&self) -> bool {
        self.dn.iter().any(|&d| d < 0)
    }

    /// CSV with header `i,dx,m,dn,iv_i`; floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "dx", "m", "dn", "iv_i"])?;
        for i in 0..self.n() {
            w.write_record([
                i.to_string(),
                format!("{:.16e}", self.dx[i]),
                format!("{:.16e}", self.m[i]),
                self.dn[i].to_string(),
                format!("{:.16e}", self.iv_i[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`PathRecord::write_csv`]. The seed is not part of
    /// the file and is set from the argument.
    pub fn read_csv<R: Read>(input: R, seed: u64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            i: usize,
            dx: f64,
            m: f64,
            dn: i64,
            iv_i: f64,
        }
        let mut r = csv::Reader::from_reader(input);
        let (mut dx, mut m, mut dn, mut iv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (k, row) in r.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.i != k {
                return Err(Error::invalid(format!("row {k} has index {}", row.i)));
            }
            dx.push(row.dx);
            m.push(row.m);
            dn.push(row.dn);
            iv.push(row.iv_i);
        }
        Self::from_parts(dx, m, dn, iv, seed)
    }
}

fn normal(rng: &mut PathRng) -> f64 {
    StandardNormal.sample(rng)
}

fn poisson(rate: f64) -> Option<Poisson<f64>> {
    (rate > 0.0).then(|| Poisson::new(rate).expect("positive finite rate"))
}

/// Sum of a Poisson number of `N(μ, σ²)` jumps: `(Σγ, count)`.
fn compound_jumps(rng: &mut PathRng, count: &Option<Poisson<f64>>, jumps: &MertonJumps) -> (f64, i64) {
    let Some(dist) = count else { return (0.0, 0) };
    let k = dist.sample(rng) as i64;
    let mut sum = 0.0;
    for _ in 0..k {
        sum += jumps.mu_jmp + jumps.sigma_jmp * normal(rng);
    }
    (sum, k)
}

pub fn simulate(spec: &ModelSpec, grid: SamplingGrid, seed: u64) -> Result<PathRecord> {
    spec.validate()?;
    let n = grid.n();
    let h = grid.h();
    let mut rng = sampling::rng_from_seed(seed);
    let mut dx = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut dn = Vec::with_capacity(n);
    let mut iv_i = Vec::with_capacity(n);
    match *spec {
        ModelSpec::Merton { sigma, jumps } => {
            let count = poisson(jumps.lambda * h);
            let sd = sigma * h.sqrt();
            for _ in 0..n {
                let cont = sd * normal(&mut rng);
                let (j, k) = compound_jumps(&mut rng, &count, &jumps);
                dx.push(cont + j);
                m.push(j);
                dn.push(k);
                iv_i.push(sigma * sigma * h);
            }
        }
        ModelSpec::HestonJump {
            mu,
            kappa,
            theta,
            xi,
            rho,
            v0,
            jumps,
            substeps,
        } => {
            (substeps as usize)
                .checked_mul(n)
                .ok_or_else(|| Error::invalid("substeps * n overflows"))?;
            let count = poisson(jumps.lambda * h);
            let dt = h / substeps as f64;
            let sqrt_dt = dt.sqrt();
            let rho_c = (1.0 - rho * rho).sqrt();
            let mut v = v0;
            for _ in 0..n {
                let mut cont = 0.0;
                let mut iv = 0.0;
                for _ in 0..substeps {
                    let z1 = normal(&mut rng);
                    let z2 = normal(&mut rng);
                    let vp = v.max(0.0);
                    cont += mu * dt + vp.sqrt() * sqrt_dt * z1;
                    v += kappa * (theta - vp) * dt + xi * vp.sqrt() * sqrt_dt * (rho * z1 + rho_c * z2);
                    iv += 0.5 * (vp + v.max(0.0)) * dt;
                }
                let (j, k) = compound_jumps(&mut rng, &count, &jumps);
                dx.push(cont + j);
                m.push(j);
                dn.push(k);
                iv_i.push(iv);
            }
        }
        ModelSpec::GaussVg {
            a_drift,
            sigma,
            sigma_jmp,
            theta_vg,
            kappa_vg,
        } => {
            let gamma = Gamma::new(h / kappa_vg, kappa_vg).map_err(|e| Error::invalid(e.to_string()))?;
            let sd = sigma * h.sqrt();
            for _ in 0..n {
                let cont = a_drift * h + sd * normal(&mut rng);
                let ds: f64 = gamma.sample(&mut rng);
                let j = theta_vg * ds + sigma_jmp * ds.sqrt() * normal(&mut rng);
                dx.push(cont + j);
                m.push(j);
                dn.push(DN_SENTINEL);
                iv_i.push(sigma * sigma * h);
            }
        }
        ModelSpec::GaussStable { sigma, y, scale } => {
            let sd = sigma * h.sqrt();
            let jump_scale = (scale * h).powf(1.0 / y);
            for _ in 0..n {
                let cont = sd * normal(&mut rng);
                let j = jump_scale * sampling::symmetric_stable(&mut rng, y);
                dx.push(cont + j);
                m.push(j);
                dn.push(DN_SENTINEL);
                iv_i.push(sigma * sigma * h);
            }
        }
    }
    PathRecord::from_parts(dx, m, dn, iv_i, seed)
}

/// Gamma subordinator increments `ΔS ~ Gamma(h/κ, κ)`, exposed for checks
/// of the VG time change.
pub fn vg_subordinator_increments(kappa_vg: f64, grid: SamplingGrid, seed: u64) -> Result<Vec<f64>> {
    positive("kappa_vg", kappa_vg)?;
    let gamma = Gamma::new(grid.h() / kappa_vg, kappa_vg).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = sampling::rng_from_seed(seed);
    Ok((0..grid.n()).map(|_| gamma.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_grid() -> SamplingGrid {
        SamplingGrid::new(1.0 / 12.0, 1638).unwrap()
    }

    fn merton(lambda: f64) -> ModelSpec {
        let h = table1_grid().h();
        ModelSpec::Merton {
            sigma: 0.4,
            jumps: MertonJumps {
                lambda,
                mu_jmp: 0.0,
                sigma_jmp: 3.0 * h.sqrt(),
            },
        }
    }

    #[test]
    fn brownian_merton_has_no_jumps() {
        let p = simulate(&merton(0.0), table1_grid(), 9).unwrap();
        assert!(p.m.iter().all(|&v| v == 0.0));
        assert!(p.dn.iter().all(|&v| v == 0));
        let h = table1_grid().h();
        assert!(p.iv_i.iter().all(|&v| v == 0.4 * 0.4 * h));
        assert!((p.iv_total / (0.16 / 12.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_path() {
        let a = simulate(&merton(100.0), table1_grid(), 5).unwrap();
        let b = simulate(&merton(100.0), table1_grid(), 5).unwrap();
        let c = simulate(&merton(100.0), table1_grid(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.dx, c.dx);
    }

    #[test]
    fn mean_jump_count_is_lambda_t() {
        let paths = 2000;
        let total: i64 = (0..paths)
            .map(|s| {
                simulate(&merton(100.0), table1_grid(), s)
                    .unwrap()
                    .dn
                    .iter()
                    .sum::<i64>()
            })
            .sum();
        let mean = total as f64 / paths as f64;
        // λT = 8.33, Poisson sd √8.33 / √2000 ≈ 0.065.
        assert!((mean - 100.0 / 12.0).abs() < 4.0 * (100.0f64 / 12.0).sqrt() / (paths as f64).sqrt());
    }

    #[test]
    fn heston_small_xi_is_constant_vol() {
        let spec = ModelSpec::HestonJump {
            mu: 0.0,
            kappa: 5.0,
            theta: 0.16,
            xi: 1e-10,
            rho: -0.5,
            v0: 0.16,
            jumps: MertonJumps {
                lambda: 0.0,
                mu_jmp: 0.0,
                sigma_jmp: 0.01,
            },
            substeps: 10,
        };
        let g = table1_grid();
        let p = simulate(&spec, g, 1).unwrap();
        for &v in &p.iv_i {
            assert!((v / (0.16 * g.h()) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn heston_rejects_bad_rho() {
        let spec = ModelSpec::HestonJump {
            mu: 0.0,
            kappa: 5.0,
            theta: 0.16,
            xi: 0.5,
            rho: -1.5,
            v0: 0.16,
            jumps: MertonJumps {
                lambda: 0.0,
                mu_jmp: 0.0,
                sigma_jmp: 0.01,
            },
            substeps: 10,
        };
        assert!(simulate(&spec, table1_grid(), 1).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = simulate(&merton(100.0), table1_grid(), 17).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = PathRecord::read_csv(buf.as_slice(), 17).unwrap();
        assert_eq!(p, q);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,dx,m,dn,iv_i\n"));
    }

    #[test]
    fn infinite_activity_models_use_sentinel() {
        let vg = ModelSpec::GaussVg {
            a_drift: 0.0,
            sigma: 0.2 / 252f64.sqrt(),
            sigma_jmp: 0.01,
            theta_vg: 0.0,
            kappa_vg: 0.7,
        };
        let g = SamplingGrid::new(21.0, 1638).unwrap();
        let p = simulate(&vg, g, 3).unwrap();
        assert!(p.dn.iter().all(|&d| d == DN_SENTINEL));
        assert!(p.is_infinite_activity());
        let st = ModelSpec::GaussStable {
            sigma: 0.4,
            y: 1.2,
            scale: 0.5,
        };
        assert!(simulate(&st, g, 3).unwrap().is_infinite_activity());
    }
}
