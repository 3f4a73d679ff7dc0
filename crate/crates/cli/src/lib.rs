//! Command-line front end for desynclab: grid simulation, model curves,
//! model-vs-simulation comparison, application calculators and the
//! normality diagnostic.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 an internal
//! iteration cap was exceeded.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod report;
pub mod settings;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{BandwidthArgs, Output};
use settings::{load_config, RawSettings, Settings};

pub const THREADS_ENV: &str = "DESYNCLAB_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Usage(String),
    Cap(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Cap(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Cap(m) => f.write_str(m),
        }
    }
}

impl From<desynclab::Error> for CliError {
    fn from(e: desynclab::Error) -> Self {
        match e {
            desynclab::Error::CapExceeded { .. } => CliError::Cap(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "desynclab",
    version,
    about = "Desynchronization convergence experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the simulation grid and emit one summary row per cell.
    Simulate {
        #[command(flatten)]
        grid: GridArgs,
        /// Append a block with one row per trial.
        #[arg(long)]
        per_trial: bool,
    },
    /// Emit model estimates over the grid.
    Estimate {
        #[command(flatten)]
        grid: GridArgs,
        /// Append the sigma trajectory behind every estimate.
        #[arg(long)]
        trajectory: bool,
        /// Multiplier for the DESYNC order conjecture.
        #[arg(long, default_value_t = 1.0)]
        conjecture_scale: f64,
    },
    /// Simulate and estimate the grid, then correlate the two.
    Compare {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Application calculators.
    Apps {
        #[command(subcommand)]
        app: AppCommand,
    },
    /// Distribution of one node's phase after a given number of updates.
    DiagnoseNormality {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 5)]
        update_index: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum AppCommand {
    /// Bandwidth per node when membership changes every T_swap seconds.
    Bandwidth {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 86_000.0)]
        b_wsn_bps: f64,
        #[arg(long, default_value_t = 100.0)]
        t_swap_s: f64,
        /// `lo:hi`; adds uniform-T_swap columns (closed form and Monte Carlo).
        #[arg(long)]
        t_swap_range: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        mc_draws: usize,
    },
    /// Firing period that reaches steady state in a given time.
    Period {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 10.0)]
        t_sstate_s: f64,
        /// Keep the noise normalized at T = 1 s instead of rescaling with T.
        #[arg(long)]
        no_renorm: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// key = value file with optional [section] headers; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// desync, pco, or a comma list.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Node count(s), comma separated.
    #[arg(long)]
    pub w: Option<String>,
    /// A value, a comma list, or start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub b_thres: Option<String>,
    #[arg(long)]
    pub c_conf: Option<String>,
    #[arg(long)]
    pub sigma_delta_ms: Option<String>,
    #[arg(long)]
    pub period_s: Option<String>,
    #[arg(long)]
    pub misfire: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub max_cycles: Option<String>,
    #[arg(long)]
    pub detection_window: Option<String>,
    /// cycle (default) or cumulative.
    #[arg(long)]
    pub pco_index_mode: Option<String>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GridArgs {
    fn raw(&self) -> RawSettings {
        let mut r = RawSettings::default();
        let pairs = [
            ("protocol", &self.protocol),
            ("w", &self.w),
            ("alpha", &self.alpha),
            ("b_thres", &self.b_thres),
            ("c_conf", &self.c_conf),
            ("sigma_delta_ms", &self.sigma_delta_ms),
            ("period_s", &self.period_s),
            ("misfire", &self.misfire),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("max_cycles", &self.max_cycles),
            ("detection_window", &self.detection_window),
            ("pco_index_mode", &self.pco_index_mode),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                r.set(k, v.clone());
            }
        }
        r
    }

    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve(&self, defaults: RawSettings) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(p) => load_config(p)?,
            None => RawSettings::default(),
        };
        Settings::resolve(&defaults.merge(file).merge(self.raw()))
    }
}

fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || {
        CliError::usage(format!(
            "invalid range '{text}' (expected lo:hi with 0 < lo <= hi)"
        ))
    };
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo) {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Runs a parsed command, returning the CSV text and the output path if any.
pub fn execute(cli: &Cli) -> Result<(Output, Option<PathBuf>), CliError> {
    let apps_defaults = || {
        let mut d = RawSettings::default();
        d.set("w", "10");
        d
    };
    match &cli.command {
        Command::Simulate { grid, per_trial } => {
            let s = grid.resolve(RawSettings::default())?;
            Ok((commands::simulate(&s, *per_trial)?, grid.out.clone()))
        }
        Command::Estimate {
            grid,
            trajectory,
            conjecture_scale,
        } => {
            if !(*conjecture_scale > 0.0) {
                return Err(CliError::usage("conjecture-scale must be positive"));
            }
            let s = grid.resolve(RawSettings::default())?;
            Ok((
                commands::estimate(&s, *trajectory, *conjecture_scale)?,
                grid.out.clone(),
            ))
        }
        Command::Compare { grid } => {
            let s = grid.resolve(RawSettings::default())?;
            Ok((commands::compare(&s)?, grid.out.clone()))
        }
        Command::DiagnoseNormality {
            grid,
            update_index,
            samples,
        } => {
            let mut d = RawSettings::default();
            d.set("protocol", "desync");
            d.set("w", "8");
            d.set("alpha", "0.5");
            d.set("b_thres", "0.02");
            d.set("misfire", "0");
            let s = grid.resolve(d)?;
            Ok((
                commands::diagnose_normality(&s, *update_index, *samples)?,
                grid.out.clone(),
            ))
        }
        Command::Apps { app } => match app {
            AppCommand::Bandwidth {
                grid,
                b_wsn_bps,
                t_swap_s,
                t_swap_range,
                mc_draws,
            } => {
                let s = grid.resolve(apps_defaults())?;
                let args = BandwidthArgs {
                    b_wsn_bps: *b_wsn_bps,
                    t_swap_s: *t_swap_s,
                    t_swap_range: t_swap_range.as_deref().map(parse_range).transpose()?,
                    mc_draws: *mc_draws,
                };
                Ok((commands::apps_bandwidth(&s, &args)?, grid.out.clone()))
            }
            AppCommand::Period {
                grid,
                t_sstate_s,
                no_renorm,
            } => {
                let s = grid.resolve(apps_defaults())?;
                Ok((
                    commands::apps_period(&s, *t_sstate_s, !no_renorm)?,
                    grid.out.clone(),
                ))
            }
        },
    }
}

/// Worker count from `DESYNCLAB_THREADS` (0 or unset: rayon's default).
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::usage(format!(
                "{THREADS_ENV} must be a non-negative integer, got '{v}'"
            ))
        }),
    }
}

/// Parses `args`, runs the command on a pool of `threads` workers and returns
/// the CSV text. Output order does not depend on `threads`.
pub fn run_to_string<I, T>(args: I, threads: usize) -> Result<Output, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::usage(e.to_string()))?;
    let (out, _) = in_pool(threads, || execute(&cli))??;
    Ok(out)
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = threads_from_env().and_then(|t| in_pool(t, || execute(&cli))?);
    match result {
        Ok((out, path)) => {
            let mut seen = std::collections::HashSet::new();
            for w in out.warnings.iter().filter(|w| seen.insert(w.as_str())) {
                eprintln!("warning: {w}");
            }
            match path {
                Some(p) => {
                    if let Err(e) = std::fs::write(&p, &out.text) {
                        eprintln!("error: cannot write {}: {e}", p.display());
                        return 2;
                    }
                }
                None => print!("{}", out.text),
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
