//! Reference values for the simulation tables and the Monte Carlo error
//! bands used to compare runs against them.

use std::path::PathBuf;

use truncvol::harness::{self, ExperimentConfig, McSummary};

/// Paths behind every reference table.
pub const REFERENCE_PATHS: f64 = 5000.0;

/// Reference row: mean relative error, its std, scaled MSE.
pub struct ReferenceRow {
    pub id: &'static str,
    pub mean: f64,
    pub std: f64,
    pub mse: f64,
}

pub const fn row(id: &'static str, mean: f64, std: f64, mse: f64) -> ReferenceRow {
    ReferenceRow { id, mean, std, mse }
}

pub const TABLE1: [ReferenceRow; 16] = [
    row("RV", 0.28625, 0.17562, 288.7300),
    row("BV", 0.06664, 0.05517, 19.1650),
    row("MinRV", 0.01563, 0.05117, 7.3287),
    row("MedRV", 0.01799, 0.04593, 6.2292),
    row("TRV_JT", 0.00992, 0.03712, 3.7799),
    row("3mc", 0.02971, 0.04262, 6.9121),
    row("3mc,k", 0.02033, 0.03978, 5.1097),
    row("2mc", 0.01500, 0.03822, 4.3174),
    row("2mc,k", 0.00908, 0.03698, 3.7127),
    row("mc2", 0.01190, 0.03712, 3.8920),
    row("mc2,k", 0.00654, 0.03646, 3.5133),
    row("NEW", -0.00046, 0.03623, 3.3605),
    row("NEW,k", -0.00048, 0.03622, 3.3593),
    row("Orc", -0.00373, 0.03463, 3.1072),
    row("TBV", 0.00185, 0.04130, 4.3759),
    row("TBV,k", 0.00110, 0.04124, 4.3586),
];

pub const TABLE3_RHO_NEG: [ReferenceRow; 16] = [
    row("RV", 0.59211, 0.28610, 693.970),
    row("BV", 0.13910, 0.07373, 42.394),
    row("MinRV", 0.03478, 0.05981, 8.527),
    row("MedRV", 0.04114, 0.05745, 8.823),
    row("TRV_JT", 0.02275, 0.04032, 4.000),
    row("3mc", 0.08215, 0.06073, 18.556),
    row("3mc,k", 0.04266, 0.04528, 7.364),
    row("2mc", 0.04388, 0.04637, 7.277),
    row("2mc,k", 0.01850, 0.03984, 3.624),
    row("mc2", 0.036717, 0.04360, 5.800),
    row("mc2,k", 0.01423, 0.03849, 3.108),
    row("NEW", 0.00228, 0.03771, 2.629),
    row("NEW,k", 0.00342, 0.03765, 2.633),
    row("Orc", -0.00582, 0.03506, 2.324),
    row("TBV", 0.00574, 0.04296, 3.466),
    row("TBV,k", 0.00254, 0.04274, 3.381),
];

/// Rows whose discretization sensitivity earns a 4 SE band in the stochastic volatility table.
pub const BV_FAMILY: [&str; 5] = ["BV", "MinRV", "MedRV", "TBV", "TBV,k"];

pub fn table_cfg(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../tables")
        .join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn run_table(name: &str, paths: usize) -> McSummary {
    let mut cfg = table_cfg(name);
    cfg.n_paths = paths;
    harness::run_experiment(&cfg, None).expect("experiment runs")
}

/// Standard error of the difference between a sample mean over `m` paths
/// and a reference mean over 5000.
pub fn combined(sd: f64, m: usize) -> f64 {
    sd * (1.0 / m as f64 + 1.0 / REFERENCE_PATHS).sqrt()
}

/// Bias against the reference std; MSE against the sample std of the
/// squared error (the reference tables do not report it).
pub fn compare_row(summary: &McSummary, want: &ReferenceRow, k: f64, failures: &mut Vec<String>) {
    let Some(r) = summary.row(want.id) else {
        failures.push(format!("{} missing", want.id));
        return;
    };
    let m = r.count as usize;
    let scale = 10f64.powi(summary.mse_scale_exp);
    let bias_tol = k * combined(want.std, m);
    let mse_tol = k * combined(r.std_sq_err, m) * scale;
    let mse = r.mse * scale;
    if (r.mean_rel_bias - want.mean).abs() > bias_tol {
        failures.push(format!(
            "{} bias {:.5} vs {:.5} (tol {:.5})",
            want.id, r.mean_rel_bias, want.mean, bias_tol
        ));
    }
    if (mse - want.mse).abs() > mse_tol {
        failures.push(format!(
            "{} mse {:.4} vs {:.4} (tol {:.4})",
            want.id, mse, want.mse, mse_tol
        ));
    }
    if r.failures > 0 {
        failures.push(format!("{} had {} failed paths", want.id, r.failures));
    }
}

pub fn mse_of(summary: &McSummary, id: &str) -> f64 {
    summary
        .row(id)
        .map(|r| r.mse * 10f64.powi(summary.mse_scale_exp))
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combined_shrinks_with_paths_to_the_reference_floor() {
        let floor = 1.0 / REFERENCE_PATHS.sqrt();
        assert!(combined(1.0, 100) > combined(1.0, 1000));
        assert!((combined(1.0, usize::MAX) - floor).abs() < 1e-12);
        assert!((combined(2.0, 5000) - 2.0 * (2.0 / 5000.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reference_tables_have_unique_ids() {
        for table in [&TABLE1, &TABLE3_RHO_NEG] {
            let mut ids: Vec<&str> = table.iter().map(|r| r.id).collect();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), table.len());
            assert!(table.iter().all(|r| r.std > 0.0 && r.mse > 0.0));
        }
    }

    #[test]
    fn shipped_configs_list_the_reference_rows() {
        let cfg = table_cfg("table1.cfg");
        let ids: Vec<&str> = cfg.estimators.iter().map(|e| e.id.as_str()).collect();
        assert!(TABLE1.iter().all(|r| ids.contains(&r.id)));
        assert!(BV_FAMILY.iter().all(|id| ids.contains(id)));
    }
}
