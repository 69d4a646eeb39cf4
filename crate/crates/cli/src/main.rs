//! `ratebench`: crash-rate benchmarking from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ratebench_core::analysis::ReportFormat;
use ratebench_core::{Category, Error};

use crate::config::RunConfig;

/// Exit statuses other than 0 (success) and 2 (usage, from clap).
pub mod exit {
    pub const FAILURE: u8 = 1;
    pub const INVALID_ARGUMENT: u8 = 2;
    pub const BAD_PATH: u8 = 3;
    pub const SCHEMA: u8 = 4;
    pub const MISSING_BENCHMARK: u8 = 5;
    pub const VALIDATION_FAILED: u8 = 6;
}

#[derive(Debug, Parser)]
#[command(
    name = "ratebench",
    version,
    about = "Crash-rate benchmarking against human-driver baselines"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = config::CONFIG_ENV)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse an SGO export, keep rider-only rows, drop superseded reports and
    /// add pre-reporting-period events.
    Ingest(IngestArgs),
    /// Assign each event to the outcome categories.
    Classify(ClassifyArgs),
    /// Incident rates with exact Poisson intervals.
    Rates(RatesArgs),
    /// Rate ratio against a human benchmark.
    Compare(CompareArgs),
    /// Mileage-weighted blend of per-market benchmarks.
    Blend(BlendArgs),
    /// Write the rate table, comparison tables and reduction series.
    Report(ReportArgs),
    /// Interval coverage and bootstrap cross-checks.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SgoInput {
    /// SGO export (CSV).
    #[arg(long)]
    pub sgo: Option<PathBuf>,
    /// Column-name mapping (TOML).
    #[arg(long)]
    pub columns: Option<PathBuf>,
    /// Event roster supplying pre-reporting-period events and overrides (CSV).
    #[arg(long)]
    pub roster: Option<PathBuf>,
    /// Skip the pre-reporting-period events.
    #[arg(long)]
    pub no_pre_sgo: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: SgoInput,
    /// Write the selected records as JSON here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: SgoInput,
    /// Records written by `ingest` (JSON), instead of `--sgo`.
    #[arg(long, conflicts_with = "sgo")]
    pub records: Option<PathBuf>,
    /// Classification rules (TOML).
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Derive every flag from the raw fields, ignoring the roster.
    #[arg(long)]
    pub no_overrides: bool,
    /// Write the classified events (CSV) here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Where classified events come from. Without any of these the built-in
/// roster is used.
#[derive(Debug, Args)]
pub struct EventsInput {
    /// Classified events written by `classify` (CSV).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Exposure ledger (TOML).
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "miles", multiple = false)]
pub struct MilesArgs {
    #[arg(long, group = "miles")]
    pub miles_millions: Option<f64>,
    #[arg(long, group = "miles")]
    pub miles_billions: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Event count for a single rate; needs `--miles-millions` or `--miles-billions`.
    #[arg(long, requires = "miles")]
    pub count: Option<u64>,
    #[command(flatten)]
    pub miles: MilesArgs,
    #[command(flatten)]
    pub events: EventsInput,
    /// Two-sided alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Benchmark key, `source:outcome-group:region`.
    #[arg(long)]
    pub benchmark: String,
    /// ADS category; defaults to the one paired with the benchmark's outcome group.
    #[arg(long)]
    pub category: Option<Category>,
    /// ADS event count; with miles, replaces the event file.
    #[arg(long, requires = "miles")]
    pub count: Option<u64>,
    #[command(flatten)]
    pub miles: MilesArgs,
    #[command(flatten)]
    pub events: EventsInput,
    /// Benchmark registry (TOML).
    #[arg(long)]
    pub benchmarks: Option<PathBuf>,
    #[arg(long)]
    pub ratio_alpha: Option<f64>,
    /// Also report a parametric-bootstrap interval with this many trials.
    #[arg(long)]
    pub bootstrap_trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    /// Benchmark source, e.g. `observed`. Without it every blendable pair is shown.
    #[arg(long, requires = "group")]
    pub source: Option<String>,
    #[arg(long)]
    pub group: Option<ratebench_core::OutcomeGroup>,
    #[arg(long)]
    pub benchmarks: Option<PathBuf>,
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub events: EventsInput,
    #[arg(long)]
    pub benchmarks: Option<PathBuf>,
    /// Output format; repeat for several.
    #[arg(long = "format")]
    pub formats: Vec<ReportFormat>,
    #[arg(long, short)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ratio_alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Repeat the checks over this many consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub sweep: u64,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Trials for both the coverage simulation and the bootstrap.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub benchmarks: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<commands::ValidationFailed>().is_some() {
        return exit::VALIDATION_FAILED;
    }
    let Some(core) = err.chain().find_map(|e| e.downcast_ref::<Error>()) else {
        return exit::FAILURE;
    };
    match core {
        Error::Io { .. } => exit::BAD_PATH,
        Error::MissingBenchmark(_) => exit::MISSING_BENCHMARK,
        Error::MissingColumn { .. }
        | Error::MalformedRow { .. }
        | Error::Csv(_)
        | Error::Json(_)
        | Error::Config(_)
        | Error::DuplicateKey(_)
        | Error::DuplicateId(_)
        | Error::Classification { .. }
        | Error::UnknownFormat(_) => exit::SCHEMA,
        Error::Domain(_) | Error::UnitMismatch(..) => exit::INVALID_ARGUMENT,
        Error::Convergence { .. } => exit::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::discover(cli.config.as_deref()).and_then(|config| match &cli.command {
        Command::Ingest(a) => commands::ingest(&config, a),
        Command::Classify(a) => commands::classify(&config, a),
        Command::Rates(a) => commands::rates(&config, a),
        Command::Compare(a) => commands::compare(&config, a),
        Command::Blend(a) => commands::blend(&config, a),
        Command::Report(a) => commands::report(&config, a),
        Command::Validate(a) => commands::validate(&config, a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let mut message = String::new();
            for cause in err.chain().map(ToString::to_string) {
                if !message.contains(&cause) {
                    if !message.is_empty() {
                        message.push_str(": ");
                    }
                    message.push_str(&cause);
                }
            }
            eprintln!("error: {message}");
            ExitCode::from(exit_code(&err))
        }
    }
}
