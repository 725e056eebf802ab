//! End-to-end runs of the `truncvol` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const HORIZON: &str = "0.08333333333333333";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_truncvol"));
    c.env_remove("TRUNCVOL_THREADS");
    c
}

fn tables() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../tables")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "stderr: {text}");
    serde_json::from_str(text.trim()).unwrap()
}

fn scalar(args: &[&str]) -> f64 {
    let o = run(args);
    assert!(o.status.success(), "{o:?}");
    stdout(&o).trim().parse().unwrap()
}

fn simulate_table1(dir: &Path) -> PathBuf {
    let out = dir.join("path.csv");
    let cfg = tables().join("table1.cfg");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    out
}

fn estimate(path: &Path, extra: &[&str]) -> serde_json::Value {
    let mut args = vec!["estimate", "--path", path.to_str().unwrap(), "--horizon", HORIZON];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{o:?}");
    serde_json::from_str(stdout(&o).trim()).unwrap()
}

fn table_csv(dir: &Path, name: &str, extra: &[&str], envs: &[(&str, &str)]) -> String {
    let out = dir.join(name);
    let cfg = tables().join("table1.cfg");
    let mut c = bin();
    c.args([
        "table",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "60",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    c.args(extra);
    for (k, v) in envs {
        c.env(k, v);
    }
    let o = c.output().unwrap();
    assert!(o.status.success(), "{o:?}");
    std::fs::read_to_string(out).unwrap()
}

#[test]
fn solve_vn_prints_a_scalar() {
    let v100 = scalar(&["solve", "vn", "--n", "100"]);
    let v10k = scalar(&["solve", "vn", "--n", "10000"]);
    assert!((2.8..=3.3).contains(&v100));
    assert!((3.7..=4.2).contains(&v10k));
}

#[test]
fn solve_wh_near_sqrt_log() {
    let h = 1.0 / (252.0 * 6.5 * 12.0);
    let w = scalar(&["solve", "wh", "--h", &h.to_string()]);
    assert!((w - 2.98).abs() < 0.01, "{w}");
}

#[test]
fn solve_levy_is_below_the_jump_scale() {
    let eps = scalar(&[
        "solve",
        "levy",
        "--sigma",
        "0.4",
        "--horizon",
        HORIZON,
        "--n",
        "1638",
        "--lambda",
        "100",
        "--sigma-jmp",
        "0.021398024625545645",
    ]);
    let sd = 0.4 * (1.0f64 / 19656.0).sqrt();
    assert!(eps > 2.0 * sd && eps < 0.021398024625545645, "{eps}");
}

#[test]
fn infinite_threshold_equals_realized_variance() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_table1(dir.path());
    let trv = estimate(&path, &["--estimator", "trv", "--eps", "inf"]);
    let rv = estimate(&path, &["--estimator", "rv"]);
    assert_eq!(trv["iv_hat"], rv["iv_hat"]);
    assert_eq!(trv["kept"], 1638);
}

#[test]
fn root_f_matches_the_new_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_table1(dir.path());
    let new = estimate(&path, &["--estimator", "new"]);
    assert_eq!(new["iterations"], 1);
    assert!(new["loss"].is_u64());
    let eps = new["eps_final"].as_f64().unwrap();
    assert!(eps > 0.005 && eps < 0.02, "{eps}");
    let root = scalar(&[
        "solve",
        "root-f",
        "--path",
        path.to_str().unwrap(),
        "--horizon",
        HORIZON,
        "--sigma",
        "0.4",
    ]);
    assert!(root > 0.005 && root < 0.02, "{root}");
}

#[test]
fn every_estimator_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_table1(dir.path());
    for e in [
        "rv", "bv", "minrv", "medrv", "trv-jt", "3mc", "3mc-k", "2mc", "2mc-k", "mc2", "mc2-k", "new", "new-k",
        "tbv-k", "oracle",
    ] {
        let r = estimate(&path, &["--estimator", e]);
        let iv = r["iv_hat"].as_f64().unwrap();
        assert!(iv > 0.0 && iv < 0.05, "{e}: {iv}");
    }
}

#[test]
fn table_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let one = table_csv(dir.path(), "a.csv", &["--threads", "1"], &[]);
    let again = table_csv(dir.path(), "b.csv", &["--threads", "1"], &[]);
    let three = table_csv(dir.path(), "c.csv", &["--threads", "3"], &[]);
    let env = table_csv(dir.path(), "d.csv", &[], &[("TRUNCVOL_THREADS", "2")]);
    assert_eq!(one, again);
    assert_eq!(one, three);
    assert_eq!(one, env);
    assert_eq!(one.lines().count(), 17);
    assert!(one.starts_with("estimator,mean_rel_err,std_rel_err,mse_x1e5,"));
}

#[test]
fn seed_override_changes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let base = table_csv(dir.path(), "a.csv", &[], &[]);
    let same = table_csv(dir.path(), "b.csv", &["--seed", "1001"], &[]);
    let other = table_csv(dir.path(), "c.csv", &["--seed", "1002"], &[]);
    assert_eq!(base, same);
    assert_ne!(base, other);
}

#[test]
fn markdown_goes_to_stdout_and_csv_to_the_configured_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tables().join("table1.cfg");
    let o = bin()
        .current_dir(dir.path())
        .args(["table", "--config", cfg.to_str().unwrap(), "--paths", "10"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("| Estimator |"));
    assert!(text.contains("| NEW,k |"));
    let csv = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn vn_curve_has_header_and_rows() {
    let o = run(&["vn-curve", "--points", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("n,v_n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn usage_errors_exit_2() {
    let o = run(&["solve", "vn", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");

    let o = run(&["estimate", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");

    // CSV without a destination.
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(tables().join("table1.cfg")).unwrap();
    let cfg = dir.path().join("no_output.cfg");
    std::fs::write(&cfg, text.replace("path = \"table1.csv\"\n", "")).unwrap();
    let o = run(&["table", "--config", cfg.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("table1.csv").exists());

    let path = simulate_table1(dir.path());
    let o = run(&[
        "estimate",
        "--path",
        path.to_str().unwrap(),
        "--horizon",
        HORIZON,
        "--estimator",
        "trv",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "i,dx,m,dn,iv_i\n0,NaN,0,0,1e-5\n1,0.01,0,0,1e-5\n").unwrap();
    let o = run(&[
        "estimate",
        "--path",
        path.to_str().unwrap(),
        "--horizon",
        "1",
        "--estimator",
        "rv",
    ]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    assert_eq!(stderr_json(&o)["error"], "numeric");
}

#[test]
fn io_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = run(&[
        "estimate",
        "--path",
        missing.to_str().unwrap(),
        "--horizon",
        "1",
        "--estimator",
        "rv",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"], "io");

    let o = run(&["table", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}
