use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{self, EstimateReport, NewMethodOptions, Statistic};
use crate::grid::SamplingGrid;
use crate::models::{ModelSpec, PathRecord};
use crate::solvers::{SigmaSource, ThresholdRule};

/// Denominator of the relative error and target of the squared error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Compare `IV̂/T` with the model's constant `σ²`.
    ModelSigma,
    /// Compare `IV̂` with the path's realized `IV`.
    PathIv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    pub reference: Reference,
    /// MSE is printed multiplied by `10^mse_scale_exp`.
    pub mse_scale_exp: i32,
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            reference: Reference::ModelSigma,
            mse_scale_exp: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    #[default]
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::invalid(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

fn default_max_iter() -> u32 {
    50
}

fn default_new_tol() -> f64 {
    1e-5
}

fn default_trv_bv() -> SigmaSource {
    SigmaSource::TrvBv
}

/// Estimator family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    Rv,
    Bv,
    MinRv,
    MedRv,
    /// Truncated realized variance with a threshold rule; `iterate = false`
    /// is a single pass.
    Trv {
        rule: ThresholdRule,
        #[serde(default)]
        iterate: bool,
        #[serde(default)]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: u32,
    },
    /// Threshold bipower variation.
    Tbv {
        rule: ThresholdRule,
        #[serde(default)]
        iterate: bool,
        #[serde(default)]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: u32,
    },
    /// Root of `F` with estimated volatility and jumps.
    New {
        #[serde(default)]
        iterate: bool,
        #[serde(default = "default_new_tol")]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: u32,
        #[serde(default = "default_trv_bv")]
        initial: SigmaSource,
    },
    Oracle,
}

impl Method {
    pub fn validate(&self) -> Result<()> {
        match self {
            Method::Trv {
                rule, tol, max_iter, ..
            }
            | Method::Tbv {
                rule, tol, max_iter, ..
            } => {
                rule.validate()?;
                if matches!(rule, ThresholdRule::RootF { .. }) {
                    return Err(Error::Config(
                        "root-of-F thresholds are configured with kind = \"new\" or \"oracle\"".into(),
                    ));
                }
                check_iteration(*tol, *max_iter)
            }
            Method::New {
                tol, max_iter, initial, ..
            } => {
                if *initial == SigmaSource::Truth {
                    return Err(Error::Config("the feasible method cannot start from the truth".into()));
                }
                check_iteration(*tol, *max_iter)
            }
            _ => Ok(()),
        }
    }

    /// Runs the estimator on one path.
    pub fn evaluate(&self, path: &PathRecord, grid: SamplingGrid) -> Result<EstimateReport> {
        let dx = &path.dx;
        let plain = |iv_hat: f64| EstimateReport {
            iv_hat,
            eps_final: None,
            iterations: 1,
            loss: None,
            kept: dx.len(),
            converged: true,
            fallback: false,
        };
        let report = match *self {
            Method::Rv => plain(estimators::rv(dx)),
            Method::Bv => plain(estimators::bv(dx)),
            Method::MinRv => plain(estimators::minrv(dx)?),
            Method::MedRv => plain(estimators::medrv(dx)?),
            Method::Trv {
                rule,
                iterate,
                tol,
                max_iter,
            } => estimators::iterate_rule(dx, grid, &rule, Statistic::Trv, tol, passes(iterate, max_iter))?,
            Method::Tbv {
                rule,
                iterate,
                tol,
                max_iter,
            } => estimators::iterate_rule(dx, grid, &rule, Statistic::Tbv, tol, passes(iterate, max_iter))?,
            Method::New {
                iterate,
                tol,
                max_iter,
                initial,
            } => estimators::new_method(
                dx,
                grid,
                &NewMethodOptions {
                    tol,
                    max_iter: passes(iterate, max_iter),
                    initial,
                },
            )?,
            Method::Oracle => estimators::oracle(path, grid)?,
        };
        Ok(report.with_loss(path))
    }
}

fn passes(iterate: bool, max_iter: u32) -> u32 {
    if iterate {
        max_iter
    } else {
        1
    }
}

fn check_iteration(tol: f64, max_iter: u32) -> Result<()> {
    if !(tol >= 0.0) || max_iter == 0 {
        return Err(Error::Config(format!(
            "iteration needs tol >= 0 and max_iter >= 1 (got tol={tol}, max_iter={max_iter})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub id: String,
    pub method: Method,
}

/// One Monte Carlo experiment: model, grid, path count, seed, estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub n_paths: usize,
    pub base_seed: u64,
    pub grid: SamplingGrid,
    pub model: ModelSpec,
    #[serde(default)]
    pub report: ReportSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 (hex) of the canonical re-serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml_string()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        self.model.validate()?;
        if self.report.reference == Reference::ModelSigma && self.model.constant_sigma().is_none() {
            return Err(Error::Config(
                "reference = \"model_sigma\" needs a constant-volatility model".into(),
            ));
        }
        let mut seen = HashSet::new();
        for e in &self.estimators {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Config(format!("duplicate estimator id {:?}", e.id)));
            }
            e.method.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "sample"
n_paths = 3
base_seed = 7

[grid]
horizon = 0.08333333333333333
n = 100

[model]
kind = "merton"
sigma = 0.4
jumps = { lambda = 100.0, mu_jmp = 0.0, sigma_jmp = 0.02 }

[[estimators]]
id = "RV"
method = { kind = "rv" }

[[estimators]]
id = "2mc,k"
method = { kind = "trv", rule = { kind = "asymp_mc", factor = 2.0 }, iterate = true }
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.estimators.len(), 2);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash().unwrap(), again.hash().unwrap());
    }

    #[test]
    fn rejects_duplicates_and_unknown_keys() {
        let dup = SAMPLE.replace("id = \"2mc,k\"", "id = \"RV\"");
        assert!(ExperimentConfig::from_toml_str(&dup).is_err());
        let extra = SAMPLE.replace("n_paths = 3", "n_paths = 3\nbogus = 1");
        assert!(ExperimentConfig::from_toml_str(&extra).is_err());
        let zero = SAMPLE.replace("n_paths = 3", "n_paths = 0");
        assert!(ExperimentConfig::from_toml_str(&zero).is_err());
    }
}
