//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a `verify` check failed, 2 configuration error,
//! 3 scheme undefined, 4 runtime or I/O failure. Errors print a single line
//! `error[<CODE>]: <message>` on stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::load_problem_config;
use crate::error::Error;
use crate::experiment::{divergence_demo, fit_rate, moment_sweep, strong_error, FitWindow, MonteCarlo};
use crate::model::{builtin_by_name, SdeProblem};
use crate::solver::SchemeKind;
use crate::taming::{sn_lower_bound_report, verify_growth, verify_monotonicity, TamedDrift, TamingRadius};

#[derive(Debug, Parser)]
#[command(name = "monotone-euler", version, about = "Monotone tamed Euler scheme experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Strong-error table against a coupled fine reference.
    Table(RunArgs),
    /// Strong-error table plus a log-log rate fit.
    Rate(RunArgs),
    /// Running-supremum moments per n.
    Moments(RunArgs),
    /// Plain vs monotone scheme from a large start.
    Diverge(RunArgs),
    /// Monotonicity and growth checks of the tamed drift.
    Verify(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Vanilla,
    Tamed,
    Monotone,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Built-in problem: cubic-mult, cubic-const or ou.
    #[arg(long, conflicts_with = "config")]
    pub problem: Option<String>,
    /// Problem definition file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "monotone")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Comma-separated steps per unit time.
    #[arg(long = "n", value_delimiter = ',')]
    pub n: Vec<u64>,
    #[arg(long = "n-ref")]
    pub n_ref: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Error exponent; for `moments`, a comma-separated list of orders.
    #[arg(long = "p", value_delimiter = ',', default_value = "2")]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Starting point for `diverge` (comma-separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// Largest n values used by the rate fit.
    #[arg(long, default_value_t = 3)]
    pub fit_top: usize,
    /// Point pairs for `verify`.
    #[arg(long, default_value_t = 100_000)]
    pub pairs: usize,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub tag: &'static str,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            tag: "E_CONFIG",
            message: message.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("error[{}]: {}", self.tag, self.message.replace('\n', " "))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, tag) = match &e {
            Error::SchemeUndefined { .. } => (3, "E_SCHEME_UNDEFINED"),
            Error::Io(_) => (4, "E_IO"),
            Error::InvalidProblem(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::NotDivisible { .. }
            | Error::Config { .. } => (2, "E_CONFIG"),
        };
        Self {
            code,
            tag,
            message: e.to_string(),
        }
    }
}

/// What a successful command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Human-readable summary for stdout.
    pub summary: String,
    /// `false` when a `verify` check failed.
    pub passed: bool,
}

fn resolve_problem(args: &RunArgs) -> Result<(SdeProblem, Vec<String>), CliError> {
    match (&args.problem, &args.config) {
        (Some(name), None) => builtin_by_name(name)
            .map(|p| (p, Vec::new()))
            .ok_or_else(|| CliError::config(format!("unknown problem '{name}' (expected cubic-mult, cubic-const or ou)"))),
        (None, Some(path)) => {
            let loaded = load_problem_config(path).map_err(|e| match e {
                Error::Io(io) => CliError::config(format!("cannot read {}: {io}", path.display())),
                other => other.into(),
            })?;
            Ok((loaded.problem, loaded.warnings))
        }
        (None, None) => Err(CliError::config("one of --problem or --config is required")),
        (Some(_), Some(_)) => Err(CliError::config("--problem and --config are mutually exclusive")),
    }
}

fn scheme_of(args: &RunArgs) -> Result<SchemeKind, CliError> {
    if !(args.alpha > 0.0 && args.alpha <= 0.5) {
        return Err(CliError::config(format!("--alpha must lie in (0, 0.5], got {}", args.alpha)));
    }
    Ok(match args.scheme {
        SchemeArg::Vanilla => SchemeKind::Vanilla,
        SchemeArg::Tamed => SchemeKind::ClassicalTamed { alpha: args.alpha },
        SchemeArg::Monotone => SchemeKind::MonotonePolygonal { alpha: args.alpha },
    })
}

fn require_n(args: &RunArgs) -> Result<Vec<u64>, CliError> {
    if args.n.is_empty() {
        return Err(CliError::config("--n needs at least one value"));
    }
    if args.n.contains(&0) {
        return Err(CliError::config("--n values must be positive"));
    }
    Ok(args.n.clone())
}

fn single_p(args: &RunArgs) -> Result<f64, CliError> {
    match args.p.as_slice() {
        [p] if *p > 0.0 => Ok(*p),
        _ => Err(CliError::config("--p must be a single positive number for this command")),
    }
}

fn plot_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.loglog.csv"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError {
        code: 4,
        tag: "E_IO",
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// Writes `csv` to `--out`, or appends it to the summary when absent.
fn emit(args: &RunArgs, csv: &str, summary: &mut String) -> Result<(), CliError> {
    match &args.out {
        Some(path) => {
            write_file(path, csv)?;
            let _ = writeln!(summary, "wrote {}", path.display());
        }
        None => summary.push_str(csv),
    }
    Ok(())
}

/// Executes one command.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let (kind, args) = match &cli.command {
        Command::Table(a) => ("table", a),
        Command::Rate(a) => ("rate", a),
        Command::Moments(a) => ("moments", a),
        Command::Diverge(a) => ("diverge", a),
        Command::Verify(a) => ("verify", a),
    };
    let (problem, warnings) = resolve_problem(args)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let scheme = scheme_of(args)?;
    let mc = MonteCarlo::new(args.trials, args.seed).with_workers(args.workers);
    let mut summary = String::new();
    let mut passed = true;

    match kind {
        "table" | "rate" => {
            let ns = require_n(args)?;
            let max_n = *ns.iter().max().expect("nonempty");
            let n_ref = args.n_ref.ok_or_else(|| CliError::config("--n-ref is required"))?;
            if n_ref % max_n != 0 {
                return Err(CliError::config(format!("--n-ref {n_ref} is not a multiple of {max_n}")));
            }
            let p = single_p(args)?;
            let table = strong_error(&problem, scheme, &ns, n_ref, p, &mc)?;
            let _ = writeln!(
                summary,
                "{} {} p={} n_ref={} trials={}",
                problem.name(),
                scheme.label(),
                p,
                n_ref,
                args.trials
            );
            for r in &table.rows {
                match &r.error {
                    None => {
                        let _ = writeln!(
                            summary,
                            "  n={:>8}  E|err|^p={:.3e} ± {:.1e}  blowups={}",
                            r.n, r.mse, r.ci_half_width, r.blowups
                        );
                    }
                    Some(e) => {
                        let _ = writeln!(summary, "  n={:>8}  {e}", r.n);
                    }
                }
            }
            let mut csv = table.to_csv();
            if kind == "rate" {
                let fit = fit_rate(&table, &FitWindow::Largest(args.fit_top))?;
                let _ = writeln!(summary, "  slope={:.4} over n={:?}", fit.slope, fit.window);
                csv.push_str(&fit.to_comment_lines());
            }
            emit(args, &csv, &mut summary)?;
            if let Some(out) = &args.out {
                let plot = plot_path(out);
                write_file(&plot, &table.plot_csv())?;
                let _ = writeln!(summary, "wrote {}", plot.display());
            }
        }
        "moments" => {
            let ns = require_n(args)?;
            let report = moment_sweep(&problem, scheme, &ns, &args.p, &mc)?;
            for r in &report.rows {
                let _ = writeln!(
                    summary,
                    "  n={:>8}  p={}  E sup|X|^p={:.4e} ± {:.1e}  blowups={}{}",
                    r.n,
                    r.p,
                    r.estimate,
                    r.ci_half_width,
                    r.blowups,
                    if r.reliable() { "" } else { "  (unreliable)" }
                );
            }
            emit(args, &report.to_csv(), &mut summary)?;
        }
        "diverge" => {
            let ns = require_n(args)?;
            let [n] = ns.as_slice() else {
                return Err(CliError::config("diverge takes a single --n"));
            };
            if args.x0.is_empty() {
                return Err(CliError::config("diverge needs --x0"));
            }
            let report = divergence_demo(&problem, *n, &args.x0, args.alpha, &mc)?;
            for e in &report.entries {
                match &e.error {
                    None => {
                        let _ = writeln!(
                            summary,
                            "  {:<9} blowup fraction={:.3}  median |X(T)|={:.4e}",
                            e.scheme.label(),
                            e.blowup_fraction,
                            e.median_endpoint
                        );
                    }
                    Some(msg) => {
                        let _ = writeln!(summary, "  {:<9} {msg}", e.scheme.label());
                    }
                }
            }
            emit(args, &report.to_csv(), &mut summary)?;
        }
        "verify" => {
            let ns = require_n(args)?;
            let mut csv = String::from("n,radius,check,region,pairs,max_violation,pass\n");
            for &n in &ns {
                let td = TamedDrift::new(&problem, n, args.alpha)?;
                let s = td.radius();
                let (mono_r, growth_r) = match s {
                    TamingRadius::Finite(v) => (2.0 * v, 10.0 * v),
                    TamingRadius::Untamed => (100.0, 100.0),
                };
                let mono = verify_monotonicity(&td, args.pairs, mono_r, args.seed);
                let growth = verify_growth(&td, args.pairs, growth_r, args.seed);
                for r in &mono.regions {
                    let _ = writeln!(
                        csv,
                        "{n},{s},monotonicity,{},{},{:e},{}",
                        r.region.label(),
                        r.pairs,
                        r.max_violation,
                        r.pass
                    );
                }
                let _ = writeln!(
                    csv,
                    "{n},{s},growth,all,{},{:e},{}",
                    growth.points, growth.max_ratio, growth.pass
                );
                let _ = writeln!(
                    summary,
                    "  n={n}  s_n={s}  monotonicity {} (max normalized {:.2e})  growth {} (max ratio {:.4}{})",
                    if mono.pass() { "pass" } else { "FAIL" },
                    mono.max_normalized(),
                    if growth.pass { "pass" } else { "FAIL" },
                    growth.max_ratio,
                    if growth.adjusted { ", adjusted for |b(0)| > n^alpha" } else { "" }
                );
                passed &= mono.pass() && growth.pass;
            }
            if problem.growth().is_some() {
                let report = sn_lower_bound_report(&problem, args.alpha, &ns)?;
                if let Some(min) = report.min_ratio() {
                    let _ = writeln!(summary, "  min (s_n - 2) n^(-alpha/(l+1)) = {min:.4}");
                }
                passed &= report.pass();
            }
            emit(args, &csv, &mut summary)?;
        }
        _ => unreachable!(),
    }
    Ok(Outcome { summary, passed })
}
