use serde::Serialize;

use crate::estimators::EstimateReport;
use crate::stats::Welford;

use super::config::Reference;

/// Cross-path statistics of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub id: String,
    /// Paths that produced an estimate.
    pub count: u64,
    /// Paths where the estimator errored or fell back to a default threshold.
    pub failures: u64,
    /// Paths where an iteration stopped at `max_iter`.
    pub nonconverged: u64,
    pub mean_rel_bias: f64,
    pub std_rel_bias: f64,
    pub se_rel_bias: f64,
    /// Unscaled mean squared error.
    pub mse: f64,
    pub std_sq_err: f64,
    pub se_mse: f64,
    pub mean_loss: Option<f64>,
    pub std_loss: Option<f64>,
    pub mean_eps: Option<f64>,
    pub std_eps: Option<f64>,
    pub mean_iters: f64,
    pub std_iters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub name: String,
    pub config_hash: String,
    pub n_paths: usize,
    pub reference: Reference,
    pub mse_scale_exp: i32,
    pub rows: Vec<SummaryRow>,
}

impl McSummary {
    pub fn row(&self, id: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.id == id)
    }
}

/// Streaming accumulator behind one [`SummaryRow`].
#[derive(Debug, Clone, Default)]
pub(crate) struct RowAccumulator {
    failures: u64,
    nonconverged: u64,
    rel: Welford,
    sq: Welford,
    loss: Welford,
    eps: Welford,
    iters: Welford,
}

impl RowAccumulator {
    pub(crate) fn fail(&mut self) {
        self.failures += 1;
    }

    /// `truth` is `σ²` (compare `IV̂/T`) or the path IV (compare `IV̂`),
    /// already in the units of `estimate`.
    pub(crate) fn push(&mut self, report: &EstimateReport, estimate: f64, truth: f64) {
        if report.fallback {
            self.failures += 1;
        }
        if !report.converged {
            self.nonconverged += 1;
        }
        let err = estimate - truth;
        self.rel.push(err / truth);
        self.sq.push(err * err);
        if let Some(l) = report.loss {
            self.loss.push(l as f64);
        }
        if let Some(e) = report.eps_final {
            self.eps.push(e);
        }
        self.iters.push(report.iterations as f64);
    }

    pub(crate) fn finish(&self, id: &str) -> SummaryRow {
        let opt = |w: &Welford, v: f64| (w.count() > 0).then_some(v);
        SummaryRow {
            id: id.to_string(),
            count: self.rel.count(),
            failures: self.failures,
            nonconverged: self.nonconverged,
            mean_rel_bias: self.rel.mean(),
            std_rel_bias: self.rel.std(),
            se_rel_bias: self.rel.std_err(),
            mse: self.sq.mean(),
            std_sq_err: self.sq.std(),
            se_mse: self.sq.std_err(),
            mean_loss: opt(&self.loss, self.loss.mean()),
            std_loss: opt(&self.loss, self.loss.std()),
            mean_eps: opt(&self.eps, self.eps.mean()),
            std_eps: opt(&self.eps, self.eps.std()),
            mean_iters: self.iters.mean(),
            std_iters: self.iters.std(),
        }
    }
}

/// Estimate and truth in the units the reference compares.
pub(crate) fn compare_units(
    reference: Reference,
    iv_hat: f64,
    horizon: f64,
    sigma2: Option<f64>,
    path_iv: f64,
) -> (f64, f64) {
    match reference {
        Reference::ModelSigma => (iv_hat / horizon, sigma2.expect("validated: constant sigma")),
        Reference::PathIv => (iv_hat, path_iv),
    }
}
