//! Monte Carlo experiment engine and table output.

pub mod config;
pub mod summary;
pub mod table;

pub use config::{EstimatorSpec, ExperimentConfig, Format, Method, OutputSpec, Reference, ReportSpec};
pub use summary::{McSummary, SummaryRow};
pub use table::{default_vn_grid, emit_table, emit_vn_curve, log_spaced_n, run_experiment};
