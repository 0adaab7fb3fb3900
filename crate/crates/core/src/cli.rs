//! Command-line surface of the `arks` binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime
//! failure, 3 blow-up termination.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{fit_decay, linearized_rates};
use crate::config::{make_init, RunConfig};
use crate::error::Error;
use crate::model::classify;
use crate::output::{fmt_f64, read_csv_column};
use crate::sweep::{run_sweep, run_to_dir, sweep_points, RunStatus, Vary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "arks", version, about = "Attraction-repulsion Keller-Segel laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the regime conditions for the configured parameters.
    Classify {
        #[arg(long)]
        config: PathBuf,
        /// Mean density for the mass-dependent conditions.
        #[arg(long)]
        ubar: Option<f64>,
    },
    /// Integrate one configuration and write diagnostics to a directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Linearised rates of a single Fourier mode about the steady state.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Mode indices `m,n`.
        #[arg(long, value_parser = parse_mode)]
        mode: (usize, usize),
    },
    /// Fit an exponential decay to one column of a diagnostics CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, default_value_t = 0.5)]
        window: f64,
    },
    /// Run a grid of configurations, one directory per point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=start:end:count`; repeat for a Cartesian grid.
        #[arg(long, required = true)]
        vary: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "ARKS_JOBS", default_value_t = 1)]
        jobs: usize,
    },
}

fn parse_mode(s: &str) -> Result<(usize, usize), String> {
    let (m, n) = s.split_once(',').ok_or("expected m,n")?;
    let m = m.trim().parse().map_err(|_| format!("bad mode index '{m}'"))?;
    let n = n.trim().parse().map_err(|_| format!("bad mode index '{n}'"))?;
    Ok((m, n))
}

/// An error and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    }
}

/// Config and I/O problems are usage errors; everything else is a runtime failure.
fn classify_error(e: Error) -> Failure {
    match e {
        Error::Config { .. }
        | Error::InvalidParameter { .. }
        | Error::InvalidGrid(_)
        | Error::Io { .. }
        | Error::Format(_) => usage(e),
        _ => runtime(e),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn io_fail(e: std::io::Error) -> Failure {
    runtime(e)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match cli.command {
        Command::Classify { config, ubar } => {
            let cfg = load_config(&config)?;
            let report = classify(&cfg.params, ubar).map_err(classify_error)?;
            write!(out, "{report}").map_err(io_fail)?;
            writeln!(out).map_err(io_fail)?;
            for (k, v) in report.key_values() {
                writeln!(out, "{k}={v}").map_err(io_fail)?;
            }
            Ok(EXIT_OK)
        }
        Command::Run { config, out: dir } => {
            let cfg = load_config(&config)?;
            let summary = run_to_dir(&cfg, &dir).map_err(classify_error)?;
            write!(out, "{}", summary.to_text()).map_err(io_fail)?;
            Ok(match summary.status {
                RunStatus::Normal => EXIT_OK,
                RunStatus::Blowup => EXIT_BLOWUP,
                RunStatus::Error => EXIT_RUNTIME,
            })
        }
        Command::Oracle { config, mode: (m, n) } => {
            let cfg = load_config(&config)?;
            let init = make_init(&cfg).map_err(classify_error)?;
            let ubar = init.mass() / cfg.grid.area();
            let k2 = cfg.grid.mode_eigenvalue(m, n);
            let r = linearized_rates(&cfg.params, ubar, k2);
            writeln!(out, "mode = {m},{n}").map_err(io_fail)?;
            writeln!(out, "ubar = {}", fmt_f64(ubar)).map_err(io_fail)?;
            writeln!(out, "k2 = {}", fmt_f64(k2)).map_err(io_fail)?;
            for k in 0..3 {
                writeln!(
                    out,
                    "eigenvalue_{k} = {} {:+e}i",
                    fmt_f64(r.eigen_real_parts[k]),
                    r.eigen_imag_parts[k]
                )
                .map_err(io_fail)?;
            }
            writeln!(out, "slowest_rate = {}", fmt_f64(r.slowest_rate())).map_err(io_fail)?;
            writeln!(out, "slowest_is_real = {}", r.slowest_is_real()).map_err(io_fail)?;
            writeln!(out, "separation = {}", fmt_f64(r.separation())).map_err(io_fail)?;
            Ok(EXIT_OK)
        }
        Command::Fit { csv, column, window } => {
            let (t, v) = read_csv_column(&csv, &column).map_err(classify_error)?;
            let fit = fit_decay(&t, &v, window).map_err(runtime)?;
            writeln!(out, "rate = {}", fmt_f64(fit.rate)).map_err(io_fail)?;
            writeln!(out, "amplitude = {}", fmt_f64(fit.amplitude)).map_err(io_fail)?;
            writeln!(out, "r_squared = {}", fmt_f64(fit.r_squared)).map_err(io_fail)?;
            writeln!(out, "window = {} {}", fmt_f64(fit.window.0), fmt_f64(fit.window.1)).map_err(io_fail)?;
            writeln!(out, "samples = {}", fit.samples).map_err(io_fail)?;
            Ok(EXIT_OK)
        }
        Command::Sweep {
            config,
            vary,
            out: dir,
            jobs,
        } => {
            let cfg = load_config(&config)?;
            let varies = vary
                .iter()
                .map(|s| Vary::parse(s))
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?;
            let points = sweep_points(&varies);
            // reject bad keys or values before any run starts
            for p in &points {
                crate::sweep::point_config(&cfg, p).map_err(usage)?;
            }
            let results = run_sweep(&cfg, &varies, &points, &dir, jobs).map_err(classify_error)?;
            let failed = results.iter().filter(|r| r.summary.status == RunStatus::Error).count();
            let blown = results.iter().filter(|r| r.summary.status == RunStatus::Blowup).count();
            writeln!(out, "points = {}", results.len()).map_err(io_fail)?;
            writeln!(out, "blowup = {blown}").map_err(io_fail)?;
            writeln!(out, "error = {failed}").map_err(io_fail)?;
            Ok(if failed > 0 {
                EXIT_RUNTIME
            } else if blown > 0 {
                EXIT_BLOWUP
            } else {
                EXIT_OK
            })
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "arks: {}", f.message);
            f.code
        }
    }
}
