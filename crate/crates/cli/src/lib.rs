//! `ctpanel`: featurize session logs into behavior panels, derive curiosity
//! labels, fit and compare continuous-time models, simulate and check
//! parameter recovery.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod error;

pub use error::CliError;

/// Schema version written into every artifact.
pub const SCHEMA_VERSION: u32 = ctpanel_ctsem::fit::FIT_SCHEMA_VERSION;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

#[derive(Debug, Parser)]
#[command(name = "ctpanel", version = VERSION, about = "Behavior panels and continuous-time latent models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Session directories → one panel.jsonl per session plus a manifest.
    Featurize(FeaturizeArgs),
    /// Rater scores → consensus curiosity labels.
    Rate(RateArgs),
    /// Turn log → per-slice turn-taking metrics.
    Turns(TurnsArgs),
    /// Fit a continuous-time model to panels.
    Fit(FitArgs),
    /// Compare fits by AIC.
    Compare(CompareArgs),
    /// Simulate panels from a design file.
    Simulate(SimulateArgs),
    /// Repeated simulate → fit parameter-recovery experiment.
    Recover(RecoverArgs),
    /// Ranked standardized links of a fit.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Session directories.
    #[arg(long, alias = "session", required = true, num_args = 1..)]
    pub sessions: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline settings (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    /// Overrides `rating.min_raters` from the config.
    #[arg(long)]
    pub min_raters: Option<usize>,
    /// Overrides `rating.time_sd_k` from the config.
    #[arg(long)]
    pub time_sd: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TurnsArgs {
    #[arg(long)]
    pub turns: PathBuf,
    #[arg(long)]
    pub session_length: f64,
    /// Slice length in seconds (default: the config's `slice_len`).
    #[arg(long)]
    pub slice: Option<f64>,
    /// Comma-separated member ids (default: every speaker).
    #[arg(long, value_delimiter = ',')]
    pub members: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Constrained,
    Free,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Panel files; every group in every file is fitted jointly.
    #[arg(long = "panel", required = true, num_args = 1..)]
    pub panels: Vec<PathBuf>,
    /// Model settings (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the ranked link table.
    #[arg(long)]
    pub links: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub top_k: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(required = true, num_args = 2..)]
    pub fits: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub design: PathBuf,
    /// Replicates (default: the design file's value, else 20).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Also fit the free model and report how often the constrained one wins.
    #[arg(long)]
    pub compare_free: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub top_k: usize,
    #[arg(long)]
    pub links: Option<PathBuf>,
}

/// Parses `args` and runs the command, printing results to stdout and
/// errors to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_output(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_output<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match commands::execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
