mod analysis;
mod error;
mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clb_core::Execution;

use crate::analysis::{ValidateOptions, COMPARE_HEADER, SWEEP_HEADER};
use crate::error::{CliError, CliResult};
use crate::scenario::{Model, SchemeChoice};

/// Cramér–Rao bounds for source localization from compressed sensor data.
///
/// Exit codes: 0 ok, 2 input error, 3 math/domain error, 4 validation
/// failure. `CLB_THREADS` caps the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "clb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// JSON bound report for a single rate.
    Crlb {
        file: PathBuf,
        /// Rate in the file's rate unit; replaces `rate` and `rate_sweep`.
        #[arg(long)]
        rate: Option<f64>,
        /// Observation time in seconds.
        #[arg(long = "T", value_name = "SECONDS")]
        observation_time: Option<f64>,
    },
    /// CSV comparison of RD and band-selective compression over the rates.
    Compare {
        file: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV of bounds per rate and scheme.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-check the analytic FIM against quadrature and optionally
    /// Monte-Carlo.
    Validate {
        file: PathBuf,
        /// Monte-Carlo snapshot count.
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gauss–Legendre nodes per band.
        #[arg(long, default_value_t = 64)]
        quadrature: usize,
        /// Scales the analytic information weights (negative control).
        #[arg(long, hide = true, default_value_t = 1.0)]
        corrupt_weight: f64,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("CLB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input("CLB_THREADS", format!("expected a positive integer, got `{value}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Math(format!("cannot start the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn load_model(file: &Path, rate: Option<f64>, observation_time: Option<f64>) -> CliResult<Model> {
    scenario::load(file)?.resolve(rate, observation_time)
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Math(format!("cannot serialize report: {e}")))
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}"))),
    }
}

/// Evaluates rows concurrently and joins them in input order.
fn table<T: Sync>(header: &str, items: &[T], row: impl Fn(&T) -> CliResult<String> + Sync + Send) -> CliResult<String> {
    let rows = Execution::Parallel.map_slice(items, row);
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r?);
        text.push('\n');
    }
    Ok(text)
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Crlb {
            file,
            rate,
            observation_time,
        } => {
            let model = load_model(&file, rate, observation_time)?;
            let [rate] = model.rates[..] else {
                return Err(CliError::input(
                    "rate",
                    "crlb needs a single rate; set `rate` or pass --rate",
                ));
            };
            let doc = analysis::crlb_document(&model, rate)?;
            write_output(None, &to_json(&doc)?)?;
        }
        Command::Compare { file, out } => {
            let model = load_model(&file, None, None)?;
            if model.spectrum.two_band().is_none() {
                return Err(CliError::input("spectrum", "compare needs a two-band `spectrum`"));
            }
            if model.scheme != SchemeChoice::Both {
                return Err(CliError::input("scheme", "compare needs `both`"));
            }
            let text = table(COMPARE_HEADER, &model.rates, |&r| {
                analysis::compare_row(&model, r).map(|row| row.to_csv())
            })?;
            write_output(out.as_deref(), &text)?;
        }
        Command::Sweep { file, out } => {
            let model = load_model(&file, None, None)?;
            let points: Vec<(f64, SchemeChoice)> = model
                .rates
                .iter()
                .flat_map(|&r| model.schemes().into_iter().map(move |s| (r, s)))
                .collect();
            let text = table(SWEEP_HEADER, &points, |&(r, s)| analysis::sweep_row(&model, s, r))?;
            write_output(Some(&out), &text)?;
        }
        Command::Validate {
            file,
            mc,
            seed,
            quadrature,
            corrupt_weight,
        } => {
            let model = load_model(&file, None, None)?;
            if !(2..=1 << 14).contains(&quadrature) {
                return Err(CliError::input("--quadrature", "must lie in [2, 16384]"));
            }
            if mc == Some(0) {
                return Err(CliError::input("--mc", "must be positive"));
            }
            let options = ValidateOptions {
                quadrature_nodes: quadrature,
                monte_carlo: mc,
                seed,
                weight_factor: corrupt_weight,
            };
            let doc = analysis::validate(&model, &options)?;
            write_output(None, &to_json(&doc)?)?;
            if let Some(c) = doc.checks.iter().find(|c| !c.pass) {
                return Err(CliError::Validation(format!(
                    "{} for scheme {} at rate {} b/s: max rel error {:e} exceeds {:e}",
                    c.comparison, c.scheme, c.rate, c.max_rel_error, c.tolerance
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("clb: {e}");
            e.exit_code()
        }
    }
}
