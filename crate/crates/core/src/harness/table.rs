use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::EstimateReport;
use crate::models::simulate;
use crate::sampling;
use crate::solvers;

use super::config::{ExperimentConfig, Format};
use super::summary::{compare_units, McSummary, RowAccumulator};

/// Path-level outcome: the path IV and one result per configured estimator.
type PathOutcome = (f64, Vec<Option<EstimateReport>>);

fn run_path(cfg: &ExperimentConfig, index: u64) -> Option<PathOutcome> {
    let seed = sampling::path_seed(cfg.base_seed, index);
    let path = simulate(&cfg.model, cfg.grid, seed).ok()?;
    let reports = cfg
        .estimators
        .iter()
        .map(|e| e.method.evaluate(&path, cfg.grid).ok())
        .collect();
    Some((path.iv_total, reports))
}

/// Runs `cfg.n_paths` seeded paths and aggregates every estimator.
///
/// Paths run in parallel on `threads` workers (rayon's default when
/// `None`); results are folded in path order, so the summary does not
/// depend on the worker count. Estimator failures are counted per row,
/// never fatal.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<McSummary> {
    cfg.validate()?;
    let work = || -> Vec<Option<PathOutcome>> {
        (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| run_path(cfg, i))
            .collect()
    };
    let outcomes = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    };

    let horizon = cfg.grid.horizon();
    let sigma2 = cfg.model.constant_sigma().map(|s| s * s);
    let mut acc = vec![RowAccumulator::default(); cfg.estimators.len()];
    for outcome in &outcomes {
        match outcome {
            None => acc.iter_mut().for_each(RowAccumulator::fail),
            Some((path_iv, reports)) => {
                for (a, r) in acc.iter_mut().zip(reports) {
                    match r {
                        None => a.fail(),
                        Some(r) => {
                            let (est, truth) = compare_units(cfg.report.reference, r.iv_hat, horizon, sigma2, *path_iv);
                            a.push(r, est, truth);
                        }
                    }
                }
            }
        }
    }
    Ok(McSummary {
        name: cfg.name.clone(),
        config_hash: cfg.hash()?,
        n_paths: cfg.n_paths,
        reference: cfg.report.reference,
        mse_scale_exp: cfg.report.mse_scale_exp,
        rows: cfg.estimators.iter().zip(&acc).map(|(e, a)| a.finish(&e.id)).collect(),
    })
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn sci_opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

fn fixed(v: f64) -> String {
    format!("{v:.5}")
}

fn fixed_opt(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

/// Renders a summary as CSV (17 significant digits) or markdown (5
/// decimals): relative error, scaled MSE, loss, threshold and iteration
/// statistics per estimator. MSE is scaled by `10^mse_scale_exp`.
pub fn emit_table(summary: &McSummary, format: Format) -> Result<String> {
    let scale = 10f64.powi(summary.mse_scale_exp);
    let mse_col = format!("mse_x1e{}", summary.mse_scale_exp);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "estimator",
                "mean_rel_err",
                "std_rel_err",
                &mse_col,
                "mean_loss",
                "std_loss",
                "mean_eps",
                "std_eps",
                "mean_n",
                "std_n",
                "se_rel_err",
                &format!("se_{mse_col}"),
                "count",
                "failures",
                "nonconverged",
            ])?;
            for r in &summary.rows {
                w.write_record([
                    r.id.clone(),
                    sci(r.mean_rel_bias),
                    sci(r.std_rel_bias),
                    sci(r.mse * scale),
                    sci_opt(r.mean_loss),
                    sci_opt(r.std_loss),
                    sci_opt(r.mean_eps),
                    sci_opt(r.std_eps),
                    sci(r.mean_iters),
                    sci(r.std_iters),
                    sci(r.se_rel_bias),
                    sci(r.se_mse * scale),
                    r.count.to_string(),
                    r.failures.to_string(),
                    r.nonconverged.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
        }
        Format::Markdown => {
            let mut out = String::new();
            out.push_str(&format!(
                "| Estimator | mean rel. err | std rel. err | MSE x1e{} | mean Loss | std Loss | mean eps | std eps | mean N | std N |\n",
                summary.mse_scale_exp
            ));
            out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n");
            for r in &summary.rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} | {} | {:.2} | {:.2} |\n",
                    r.id,
                    fixed(r.mean_rel_bias),
                    fixed(r.std_rel_bias),
                    fixed(r.mse * scale),
                    fixed_opt(r.mean_loss),
                    fixed_opt(r.std_loss),
                    fixed_opt(r.mean_eps),
                    fixed_opt(r.std_eps),
                    r.mean_iters,
                    r.std_iters,
                ));
            }
            let failed: Vec<String> = summary
                .rows
                .iter()
                .filter(|r| r.failures > 0 || r.nonconverged > 0)
                .map(|r| format!("{} ({} failed, {} not converged)", r.id, r.failures, r.nonconverged))
                .collect();
            out.push_str(&format!(
                "\n{} paths; config sha256 {}; {}\n",
                summary.n_paths,
                summary.config_hash,
                if failed.is_empty() {
                    "no failures".to_string()
                } else {
                    format!("failures: {}", failed.join(", "))
                }
            ));
            Ok(out)
        }
    }
}

/// `count` log-spaced integers from `lo` to `hi` (duplicates removed).
pub fn log_spaced_n(lo: usize, hi: usize, count: usize) -> Result<Vec<usize>> {
    if lo < 2 || hi < lo || count == 0 {
        return Err(Error::invalid("need 2 <= lo <= hi and count >= 1"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut v: Vec<usize> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    v.dedup();
    Ok(v)
}

/// Default grid for the `v_n` curve: 41 log-spaced points on [100, 10000].
pub fn default_vn_grid() -> Vec<usize> {
    log_spaced_n(100, 10_000, 41).expect("valid constants")
}

/// CSV `n,v_n` over the requested `n`.
pub fn emit_vn_curve(n_values: &[usize]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "v_n"])?;
    for &n in n_values {
        w.write_record([n.to_string(), sci(solvers::solve_vn(n)?)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
