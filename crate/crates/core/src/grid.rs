use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform observation grid on `[0, T]` with `n` intervals of length `h = T/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct SamplingGrid {
    t_horizon: f64,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    horizon: f64,
    n: usize,
}

impl TryFrom<RawGrid> for SamplingGrid {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        SamplingGrid::new(raw.horizon, raw.n)
    }
}

impl From<SamplingGrid> for RawGrid {
    fn from(g: SamplingGrid) -> Self {
        RawGrid {
            horizon: g.t_horizon,
            n: g.n,
        }
    }
}

impl SamplingGrid {
    pub fn new(t_horizon: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid needs at least one interval"));
        }
        if !(t_horizon.is_finite() && t_horizon > 0.0) {
            return Err(Error::invalid(format!("horizon must be positive, got {t_horizon}")));
        }
        Ok(Self { t_horizon, n })
    }

    /// Grid with step `h` and `n` intervals (`T = n·h`).
    pub fn from_step(h: f64, n: usize) -> Result<Self> {
        Self::new(h * n as f64, n)
    }

    pub fn horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.t_horizon / self.n as f64
    }

    /// ln(1/h)
    pub fn log_inv_h(&self) -> f64 {
        -self.h().ln()
    }
}
