use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid argument {0}")]
    Arg(String),
    #[error("{0}")]
    Module(String),
}

macro_rules! module_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Module(e.to_string())
            }
        }
    )*};
}

module_errors!(
    vou::grid::GridError,
    vou::levy::LevyError,
    vou::drift::DriftError,
    vou::resolvent::ResolventError,
    vou::kernels::KernelError,
    vou::simulator::SimError,
    vou::moments::MomentError,
    vou::diagnostics::DiagError
);

#[derive(Parser, Debug)]
#[command(name = "vou", version, about = "Volterra Ornstein-Uhlenbeck random fields: simulation, resolvents, moments and diagnostics")]
struct Cli {
    /// worker threads (falls back to VOU_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Stat {
    Mean,
    Var,
    Acov,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelKind {
    Generic,
    Ex1,
    Ex2,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum What {
    Existence,
    Stationarity,
    Memory,
    Regvar,
    Holder,
    Cadlag,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate replicates of the field
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// reduce replicates to one statistic field instead of writing each one
        #[arg(long, value_enum)]
        stats: Option<Stat>,
        /// time lag in steps for `--stats acov`
        #[arg(long, default_value_t = 1)]
        lag_t: usize,
        /// spatial lag in steps along the first axis for `--stats acov`
        #[arg(long, default_value_t = 0)]
        lag_x: isize,
    },
    /// Resolvent of the drift measure on a grid
    Resolvent {
        /// config with a `[mu]` section (and a `[grid]` unless `--grid` is given)
        #[arg(long)]
        mu: PathBuf,
        /// `t_max,dt` or `t_max,dt,x_max,dx`
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// print the identity residual
        #[arg(long)]
        check: bool,
    },
    /// Covariance and correlation over a set of lags
    Covariance {
        #[arg(long, value_enum)]
        model: ModelKind,
        /// config for the generic model (kernel from `[mu]`, `[g]`, moments from `[levy]`)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_p: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        m2: f64,
        /// `tau0:tau1:n,xi0:xi1:m` or a file of `tau,xi...` rows
        #[arg(long)]
        lags: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check existence and stationarity conditions and probe path properties
    Diagnose {
        #[arg(long, value_enum)]
        what: What,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// exit 2 when a condition fails
        #[arg(long)]
        strict: bool,
    },
    /// Run the acceptance suite
    Validate {
        /// recorded for provenance only; the suite fixes its own setups
        #[arg(long)]
        config: Option<PathBuf>,
        /// subset of criteria, e.g. `1,2,8`
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<usize>>,
    },
}

fn threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("VOU_THREADS") {
            Ok(s) => Some(s.trim().parse().map_err(|_| CliError::Arg(format!("VOU_THREADS = {s:?}")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Module(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    threads(cli.threads)?;
    match cli.cmd {
        Cmd::Simulate { config, out_dir, replicates, seed, stats, lag_t, lag_x } => {
            commands::simulate(&config, &out_dir, replicates, seed, stats, (lag_t, lag_x)).map(|_| true)
        }
        Cmd::Resolvent { mu, grid, tol, out, check } => commands::resolvent(&mu, grid.as_deref(), tol, out.as_deref(), check).map(|_| true),
        Cmd::Covariance { model, config, dim, lambda, lambda_p, c, m2, lags, out } => {
            let p = commands::ModelParams { dim, lambda, lambda_p, c, m2 };
            commands::covariance(model, config.as_deref(), p, &lags, out.as_deref()).map(|_| true)
        }
        Cmd::Diagnose { what, config, out, strict } => commands::diagnose(what, &config, out.as_deref()).map(|ok| ok || !strict),
        Cmd::Validate { config, criteria } => commands::validate(config.as_deref(), criteria),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
