//! `feedersim`: ingest smart-meter profiles, sample feeders and export the
//! results, one reproducible run directory per command.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use feedersim_core::sampler::DEFAULT_CONNECTIONS;
use feedersim_core::{DayRange, Direction, DirectionSelection, SubsetSpec};
use serde::Serialize;

/// A problem with the command line rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Parser)]
#[command(
    name = "feedersim",
    version,
    about = "Monte Carlo feeder-load modelling from smart-meter profiles"
)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "FEEDERSIM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate readings and labels into a profile store.
    Ingest(IngestArgs),
    /// Subset summary table and peak histograms.
    Summarize(SummarizeArgs),
    /// Sample feeders and aggregate peak and simultaneity distributions.
    Sample(SampleArgs),
    /// Peak contribution of a technology by differencing two populations.
    Contribution(ContributionArgs),
    /// Peak timing and feeder envelopes for a finished sampling run.
    Timing(TimingArgs),
    /// Generate a synthetic profile store.
    Synth(SynthArgs),
    /// Write a store back to delimited text, with per-profile panels.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Figures,
    Both,
}

impl Format {
    pub fn tables(self) -> bool {
        matches!(self, Format::Table | Format::Both)
    }

    pub fn figures(self) -> bool {
        matches!(self, Format::Figures | Format::Both)
    }
}

#[derive(Args, Serialize)]
pub struct IngestArgs {
    /// Readings as `profile_id,timestamp,power_kw`.
    #[arg(long)]
    pub profiles: PathBuf,
    /// Labels as `profile_id,has_hp,has_ev,pv_inverter_kva,connection_power_kva`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Hourly `timestamp,temperature_c,ssrd_kw_m2`.
    #[arg(long)]
    pub weather: Option<PathBuf>,
    #[arg(long, default_value_t = 2022)]
    pub year: i32,
    #[arg(long, default_value = "Europe/Brussels")]
    pub timezone: String,
    /// Longest run of missing quarter-hours that is interpolated.
    #[arg(long, default_value_t = 96)]
    pub max_gap: usize,
    /// Store directory to create.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Repeatable; defaults to `all` and the four built-in subsets.
    #[arg(long)]
    pub subset: Vec<SubsetSpec>,
    /// Bin width of the peak histograms, kW.
    #[arg(long, default_value_t = 0.5)]
    pub bin_width: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Args, Serialize, Clone)]
pub struct SamplingArgs {
    /// Comma-separated feeder sizes.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CONNECTIONS)]
    pub connections: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "both")]
    pub direction: DirectionSelection,
}

#[derive(Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value = "all")]
    pub subset: SubsetSpec,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Args, Serialize)]
pub struct ContributionArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Population with the technology.
    #[arg(long = "with")]
    pub with_subset: SubsetSpec,
    /// Reference population without it.
    #[arg(long = "without", default_value = "no-hp-no-ev")]
    pub without_subset: SubsetSpec,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Args, Serialize)]
pub struct TimingArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Output directory of an earlier `sample` run.
    #[arg(long)]
    pub run: PathBuf,
    /// Feeder sizes that get an envelope; defaults to every size in the run.
    #[arg(long, value_delimiter = ',')]
    pub connections: Vec<usize>,
    /// Envelope days as `START..END` (zero-based, END exclusive); defaults
    /// to the week around the most likely peak day.
    #[arg(long)]
    pub days: Option<DayRange>,
    /// Restrict to one direction.
    #[arg(long)]
    pub direction: Option<Direction>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    /// Generator settings as TOML; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Store directory to create.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Comma-separated profile ids that get panel tables.
    #[arg(long, value_delimiter = ',')]
    pub panels: Vec<String>,
    /// Bin width of the panel histograms, kW.
    #[arg(long, default_value_t = 0.25)]
    pub bin_width: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Summarize(a) => commands::summarize(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Contribution(a) => commands::contribution(&a),
        Command::Timing(a) => commands::timing(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Export(a) => commands::export(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
