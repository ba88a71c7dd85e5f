//! `debern`: fit, evaluate and benchmark Bernstein deconvolution estimates.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use debern::{DeconvError, ErrorModel};

mod commands;
mod io;

/// Exit status for malformed input data.
const EXIT_DATA: u8 = 3;
/// Exit status for numerical failures during fitting.
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "debern", version, about = "Density deconvolution with Bernstein polynomials")]
pub struct Cli {
    /// Seed for simulation studies.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DEBERN_THREADS")]
    threads: Option<usize>,

    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a deconvolution model to one column of a CSV file.
    Fit(FitArgs),
    /// Tabulate density and CDF of a fitted model.
    Density(DensityArgs),
    /// Run a Monte Carlo study on a preset scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ErrorFamily {
    Normal,
    Laplace,
    Gnormal,
    Uniform,
    Dirac,
}

#[derive(Args, Debug)]
struct ErrorArgs {
    /// Measurement error law.
    #[arg(long, value_enum)]
    error: ErrorFamily,

    /// Error standard deviation (normal, laplace, uniform).
    #[arg(long, conflicts_with_all = ["error_alpha", "error_halfwidth"])]
    error_sd: Option<f64>,

    /// Generalized normal scale.
    #[arg(long, requires = "error_gamma", conflicts_with = "error_halfwidth")]
    error_alpha: Option<f64>,

    /// Generalized normal shape.
    #[arg(long)]
    error_gamma: Option<f64>,

    /// Uniform error half-width.
    #[arg(long)]
    error_halfwidth: Option<f64>,
}

fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> clap::Error {
    Cli::command().error(kind, msg)
}

impl ErrorArgs {
    fn resolve(&self) -> Result<ErrorModel, clap::Error> {
        let missing = |flag: &str| {
            usage_error(
                ErrorKind::MissingRequiredArgument,
                format!("--error {:?} requires {flag}", self.error).to_lowercase(),
            )
        };
        let unused = |flag: &str| {
            usage_error(
                ErrorKind::ArgumentConflict,
                format!("{flag} does not apply to --error {:?}", self.error).to_lowercase(),
            )
        };
        let model = match self.error {
            ErrorFamily::Normal | ErrorFamily::Laplace => {
                if self.error_alpha.is_some() || self.error_gamma.is_some() {
                    return Err(unused("--error-alpha/--error-gamma"));
                }
                if self.error_halfwidth.is_some() {
                    return Err(unused("--error-halfwidth"));
                }
                let sd = self.error_sd.ok_or_else(|| missing("--error-sd"))?;
                if self.error == ErrorFamily::Normal {
                    ErrorModel::normal(sd)
                } else {
                    ErrorModel::laplace(sd)
                }
            }
            ErrorFamily::Gnormal => {
                if self.error_sd.is_some() || self.error_halfwidth.is_some() {
                    return Err(unused("--error-sd/--error-halfwidth"));
                }
                let alpha = self.error_alpha.ok_or_else(|| missing("--error-alpha"))?;
                let gamma = self.error_gamma.ok_or_else(|| missing("--error-gamma"))?;
                ErrorModel::generalized_normal(alpha, gamma)
            }
            ErrorFamily::Uniform => {
                if self.error_alpha.is_some() || self.error_gamma.is_some() {
                    return Err(unused("--error-alpha/--error-gamma"));
                }
                let halfwidth = match (self.error_halfwidth, self.error_sd) {
                    (Some(h), None) => h,
                    (None, Some(sd)) => sd * 3f64.sqrt(),
                    _ => return Err(missing("--error-halfwidth or --error-sd")),
                };
                ErrorModel::uniform(halfwidth)
            }
            ErrorFamily::Dirac => {
                if self.error_sd.is_some()
                    || self.error_alpha.is_some()
                    || self.error_gamma.is_some()
                    || self.error_halfwidth.is_some()
                {
                    return Err(unused("error parameters"));
                }
                Ok(ErrorModel::Dirac)
            }
        };
        model.map_err(|e| usage_error(ErrorKind::ValueValidation, e))
    }
}

fn parse_degrees(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad degree `{lo}`"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad degree `{hi}`"))?;
    if lo > hi {
        return Err(format!("empty degree range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_support(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected A,B, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad bound `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad bound `{b}`"))?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(format!("support needs finite A < B, got {a},{b}"));
    }
    Ok((a, b))
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV file with one observation per row.
    #[arg(long)]
    input: PathBuf,

    /// Column to read: header name or 1-based index (default: first).
    #[arg(long)]
    column: Option<String>,

    #[command(flatten)]
    error: ErrorArgs,

    /// Support of the estimate as A,B (default: data range widened by --zeta error sds).
    #[arg(long, value_parser = parse_support, allow_hyphen_values = true)]
    support: Option<(f64, f64)>,

    /// Support extension in error standard deviations.
    #[arg(long, default_value_t = 3.0)]
    zeta: f64,

    /// Degrees to sweep as LO:HI (default: from the moment lower bound).
    #[arg(long, value_parser = parse_degrees)]
    degrees: Option<(usize, usize)>,

    /// Number of degrees beyond the lower bound when --degrees is absent.
    #[arg(long, default_value_t = 50)]
    grid_width: usize,

    /// Relative EM stopping tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// EM iteration cap per degree.
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,

    /// Model file.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,

    /// Degree trace CSV (default: trace.csv next to the model file).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DensityArgs {
    /// Model file written by `fit`.
    #[arg(long)]
    model: PathBuf,

    /// Number of grid intervals over the support.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
    grid: u64,

    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimError {
    Normal,
    Laplace,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Preset scenario.
    #[arg(long, required_unless_present = "list_scenarios")]
    scenario: Option<String>,

    /// Print the preset scenarios and exit.
    #[arg(long)]
    list_scenarios: bool,

    /// Sample size per run.
    #[arg(long, default_value_t = 100)]
    n: usize,

    /// Measurement error law.
    #[arg(long, value_enum, default_value_t = SimError::Normal)]
    error: SimError,

    /// Error standard deviation.
    #[arg(long, required_unless_present = "list_scenarios")]
    sigma0: Option<f64>,

    /// Monte Carlo runs (at least 2).
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
    runs: u64,

    /// Degree range as LO:HI (default: the preset's).
    #[arg(long, value_parser = parse_degrees)]
    degrees: Option<(usize, usize)>,

    /// Reuse the first run's draws in every run.
    #[arg(long)]
    same_seed: bool,

    /// Study CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Per-gridpoint pMSE CSV.
    #[arg(long)]
    pmse_out: Option<PathBuf>,
}

/// Exit status for an error that reached `main`.
fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<DeconvError>() {
            return if e.is_data_error() { EXIT_DATA } else { EXIT_NUMERICAL };
        }
        if cause.downcast_ref::<io::DataError>().is_some() {
            return EXIT_DATA;
        }
    }
    1
}

/// Context messages joined down to the first library error, whose own
/// message already carries its sources.
fn render(err: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for cause in err.chain() {
        parts.push(cause.to_string());
        if cause.downcast_ref::<DeconvError>().is_some() {
            break;
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    let result = match &cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Density(args) => commands::density(args),
        Command::Simulate(args) => commands::simulate(args, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(usage) = err.downcast_ref::<clap::Error>() {
                let _ = usage.print();
                return ExitCode::from(2);
            }
            eprintln!("error: {}", render(&err));
            ExitCode::from(exit_status(&err))
        }
    }
}
