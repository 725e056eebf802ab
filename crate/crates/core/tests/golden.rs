//! Table output against checked-in golden files.
//!
//! Set `TRUNCVOL_BLESS=1` to rewrite the files after an intended format
//! change.

use std::path::PathBuf;

use truncvol::harness::{emit_table, Format, McSummary, Reference, SummaryRow};

fn summary() -> McSummary {
    let plain = SummaryRow {
        id: "RV".into(),
        count: 4,
        failures: 0,
        nonconverged: 0,
        mean_rel_bias: 0.28625,
        std_rel_bias: 0.17562,
        se_rel_bias: 0.08781,
        mse: 2.8873e-3,
        std_sq_err: 1.5e-3,
        se_mse: 7.5e-4,
        mean_loss: None,
        std_loss: None,
        mean_eps: None,
        std_eps: None,
        mean_iters: 1.0,
        std_iters: 0.0,
    };
    let iterated = SummaryRow {
        id: "2mc,k".into(),
        count: 3,
        failures: 1,
        nonconverged: 0,
        mean_rel_bias: -0.00046,
        std_rel_bias: 0.03623,
        se_rel_bias: 0.020918,
        mse: 3.3605e-5,
        std_sq_err: 4.1e-5,
        se_mse: 2.367e-5,
        mean_loss: Some(3.5),
        std_loss: Some(1.8),
        mean_eps: Some(0.0127),
        std_eps: Some(2.3e-4),
        mean_iters: 7.0 / 3.0,
        std_iters: 0.5773502691896258,
    };
    McSummary {
        name: "golden".into(),
        config_hash: "00".repeat(32),
        n_paths: 4,
        reference: Reference::ModelSigma,
        mse_scale_exp: 5,
        rows: vec![plain, iterated],
    }
}

fn check(file: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(file);
    if std::env::var_os("TRUNCVOL_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "{file} differs from the golden copy");
}

#[test]
fn csv_matches_golden() {
    check("summary.csv", &emit_table(&summary(), Format::Csv).unwrap());
}

#[test]
fn markdown_matches_golden() {
    check("summary.md", &emit_table(&summary(), Format::Markdown).unwrap());
}

#[test]
fn csv_parses_back_to_full_precision() {
    let s = summary();
    let text = emit_table(&s, Format::Csv).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    for (rec, row) in rows.iter().zip(&s.rows) {
        assert_eq!(&rec[0], row.id);
        assert_eq!(rec[1].parse::<f64>().unwrap(), row.mean_rel_bias);
        assert_eq!(rec[3].parse::<f64>().unwrap(), row.mse * 1e5);
        assert_eq!(rec[8].parse::<f64>().unwrap(), row.mean_iters);
    }
    assert_eq!(&rows[0][4], "");
}
