//! `truncvol`: simulate paths, run estimators, reproduce tables, solve for
//! thresholds.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use truncvol::estimators::{self, NewMethodOptions, Statistic};
use truncvol::harness::{self, ExperimentConfig, Format};
use truncvol::kernels::{CmseObjectiveInput, FaJumpLaw};
use truncvol::models::{simulate, PathRecord};
use truncvol::sampling;
use truncvol::solvers::{self, RootConfig, SigmaSource, ThresholdRule};
use truncvol::{Error, SamplingGrid};

#[derive(Parser)]
#[command(
    name = "truncvol",
    version,
    about = "Optimal thresholds for truncated realized variance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path of an experiment config and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Path index within the experiment (seed derivation as in `table`).
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Run one estimator on a path CSV.
    Estimate(EstimateArgs),
    /// Run an experiment config and emit its table.
    Table {
        #[arg(long)]
        config: PathBuf,
        /// CSV output file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides n_paths.
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, env = "TRUNCVOL_THREADS")]
        threads: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Scalar solvers.
    Solve {
        #[command(subcommand)]
        which: SolveCommand,
    },
    /// Write the v_n curve as CSV.
    VnCurve {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        min: usize,
        #[arg(long, default_value_t = 10_000)]
        max: usize,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Rv,
    Bv,
    Minrv,
    Medrv,
    Trv,
    Tbv,
    TrvJt,
    #[value(name = "3mc")]
    Mc3,
    #[value(name = "3mc-k")]
    Mc3K,
    #[value(name = "2mc")]
    Mc2mc,
    #[value(name = "2mc-k")]
    Mc2mcK,
    Mc2,
    Mc2K,
    New,
    NewK,
    TbvK,
    Oracle,
}

#[derive(Args)]
struct EstimateArgs {
    /// Path CSV (columns i,dx,m,dn,iv_i).
    #[arg(long)]
    path: PathBuf,
    /// Horizon T of the path.
    #[arg(long)]
    horizon: f64,
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    /// Threshold for `trv` and `tbv` (accepts `inf`).
    #[arg(long)]
    eps: Option<f64>,
    /// Multiplier of the power rule c·h^ω·σ̂_BV.
    #[arg(long, default_value_t = 4.0)]
    c: f64,
    #[arg(long, default_value_t = 0.49)]
    omega: f64,
    /// Relative tolerance of the NEW and TBV iterations.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: u32,
}

#[derive(Subcommand)]
enum SolveCommand {
    /// v_n for n observations.
    Vn {
        #[arg(long)]
        n: usize,
    },
    /// w_h for step h.
    Wh {
        #[arg(long)]
        h: f64,
    },
    /// Root of F on a path CSV.
    RootF {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        sigma: f64,
        /// Use the path's jump column instead of zero jumps.
        #[arg(long)]
        true_jumps: bool,
    },
    /// Root of the Lévy MSE equation for Gaussian jump sizes.
    Levy {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        mu_jmp: f64,
        #[arg(long)]
        sigma_jmp: f64,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Numeric(_) => "numeric",
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            e if e.is_numeric() => Failure::Numeric(e.to_string()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_path(path: &Path) -> Result<PathRecord, Failure> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(PathRecord::read_csv(file, 0)?)
}

fn path_grid(path: &PathRecord, horizon: f64) -> Result<SamplingGrid, Failure> {
    Ok(SamplingGrid::new(horizon, path.n())?)
}

fn print_scalar(v: f64) {
    println!("{v}");
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            index,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let base = seed.unwrap_or(cfg.base_seed);
            let path = simulate(&cfg.model, cfg.grid, sampling::path_seed(base, index))?;
            let file = fs::File::create(&out).map_err(|e| io_err(&out, e))?;
            path.write_csv(std::io::BufWriter::new(file))?;
        }
        Command::Estimate(args) => {
            let path = read_path(&args.path)?;
            let grid = path_grid(&path, args.horizon)?;
            let report = estimate(&args, &path, grid)?;
            println!(
                "{}",
                serde_json::to_string(&report).map_err(|e| Failure::Io(e.to_string()))?
            );
        }
        Command::Table {
            config,
            out,
            seed,
            paths,
            threads,
            format,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(p) = paths {
                cfg.n_paths = p;
            }
            let format = match format {
                Some(FormatArg::Csv) => Format::Csv,
                Some(FormatArg::Markdown) => Format::Markdown,
                None => cfg.output.format,
            };
            let out = out.or_else(|| cfg.output.path.clone().map(PathBuf::from));
            if format == Format::Csv && out.is_none() {
                return Err(Failure::Usage(
                    "CSV output needs --out (or output.path in the config)".into(),
                ));
            }
            let summary = harness::run_experiment(&cfg, threads)?;
            if let Some(out) = &out {
                write_file(out, &harness::emit_table(&summary, Format::Csv)?)?;
            }
            if format == Format::Markdown {
                print!("{}", harness::emit_table(&summary, Format::Markdown)?);
            }
        }
        Command::Solve { which } => solve(which)?,
        Command::VnCurve { out, min, max, points } => {
            let grid = harness::log_spaced_n(min, max, points)?;
            let text = harness::emit_vn_curve(&grid)?;
            match out {
                Some(p) => write_file(&p, &text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn estimate(args: &EstimateArgs, path: &PathRecord, grid: SamplingGrid) -> Result<estimators::EstimateReport, Failure> {
    let dx = &path.dx;
    let plain = |iv_hat: f64| estimators::EstimateReport {
        iv_hat,
        eps_final: None,
        iterations: 1,
        loss: None,
        kept: dx.len(),
        converged: true,
        fallback: false,
    };
    let need_eps = || {
        args.eps
            .ok_or_else(|| Failure::Usage("this estimator needs --eps".into()))
    };
    let power = ThresholdRule::PowerBv {
        c: args.c,
        omega: args.omega,
    };
    let mc = |factor: f64| ThresholdRule::AsympMc {
        factor,
        sigma_source: SigmaSource::Rv,
    };
    let mc2 = ThresholdRule::Mc2 {
        sigma_source: SigmaSource::Rv,
    };
    let iter = |rule: ThresholdRule, stat: Statistic, tol: f64, max_iter: u32| {
        estimators::iterate_rule(dx, grid, &rule, stat, tol, max_iter)
    };
    let report = match args.estimator {
        EstimatorArg::Rv => plain(estimators::rv(dx)),
        EstimatorArg::Bv => plain(estimators::bv(dx)),
        EstimatorArg::Minrv => plain(estimators::minrv(dx)?),
        EstimatorArg::Medrv => plain(estimators::medrv(dx)?),
        EstimatorArg::Trv => estimators::trv(dx, need_eps()?),
        EstimatorArg::Tbv => estimators::tbv(dx, need_eps()?),
        EstimatorArg::TrvJt => iter(power, Statistic::Trv, 0.0, 1)?,
        EstimatorArg::Mc3 => iter(mc(3.0), Statistic::Trv, 0.0, 1)?,
        EstimatorArg::Mc3K => iter(mc(3.0), Statistic::Trv, 0.0, args.max_iter)?,
        EstimatorArg::Mc2mc => iter(mc(2.0), Statistic::Trv, 0.0, 1)?,
        EstimatorArg::Mc2mcK => iter(mc(2.0), Statistic::Trv, 0.0, args.max_iter)?,
        EstimatorArg::Mc2 => iter(mc2, Statistic::Trv, 0.0, 1)?,
        EstimatorArg::Mc2K => iter(mc2, Statistic::Trv, 0.0, args.max_iter)?,
        EstimatorArg::TbvK => iter(power, Statistic::Tbv, args.tol, args.max_iter)?,
        EstimatorArg::New => estimators::new_method(dx, grid, &NewMethodOptions::single())?,
        EstimatorArg::NewK => estimators::new_method(
            dx,
            grid,
            &NewMethodOptions {
                tol: args.tol,
                max_iter: args.max_iter,
                ..NewMethodOptions::default()
            },
        )?,
        EstimatorArg::Oracle => estimators::oracle(path, grid)?,
    };
    Ok(report.with_loss(path))
}

fn solve(which: SolveCommand) -> Result<(), Failure> {
    match which {
        SolveCommand::Vn { n } => print_scalar(solvers::solve_vn(n)?),
        SolveCommand::Wh { h } => print_scalar(solvers::solve_wh(h)?),
        SolveCommand::RootF {
            path,
            horizon,
            sigma,
            true_jumps,
        } => {
            let p = read_path(&path)?;
            let grid = path_grid(&p, horizon)?;
            let zeros = vec![0.0; p.n()];
            let jumps = if true_jumps { &p.m } else { &zeros };
            let input = CmseObjectiveInput {
                eps: 0.0,
                sigma,
                jumps,
                grid,
            };
            let cfg = RootConfig::for_scale(sigma, grid.h())?;
            print_scalar(solvers::solve_root_f(&input, &cfg)?);
        }
        SolveCommand::Levy {
            sigma,
            horizon,
            n,
            lambda,
            mu_jmp,
            sigma_jmp,
        } => {
            let grid = SamplingGrid::new(horizon, n)?;
            let law = FaJumpLaw::normal(lambda, mu_jmp, sigma_jmp)?;
            let cfg = RootConfig::for_scale(sigma, grid.h())?;
            print_scalar(solvers::solve_levy_mse(sigma, grid, &law, &cfg)?);
        }
    }
    Ok(())
}

fn report_failure(f: &Failure) {
    let line = serde_json::json!({ "error": f.kind(), "message": f.message().replace('\n', " ") });
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                };
            }
            let f = Failure::Usage(e.to_string().trim().to_string());
            report_failure(&f);
            return ExitCode::from(f.code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report_failure(&f);
            ExitCode::from(f.code())
        }
    }
}
