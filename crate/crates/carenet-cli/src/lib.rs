//! Command-line front end for the carenet pipeline.
//!
//! Thin wrapper: flags override the TOML config, the library does the work,
//! and errors map onto the exit-code contract (0 success, 1 usage, 2 data,
//! 3 non-convergence).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use carenet::pipeline::{self, PipelineConfig, Stage};
use carenet::Error;

#[derive(Parser)]
#[command(
    name = "carenet",
    version,
    about = "Mine care-coordination patterns from EMR access-event logs"
)]
struct Cli {
    /// TOML pipeline configuration; flags override file values.
    #[arg(long, value_name = "FILE", global = true)]
    config: Option<PathBuf>,

    /// Root seed for all randomized stages.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of patient/area groups.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Cosine-similarity edge threshold in [0, 1).
    #[arg(long, global = true)]
    tau: Option<f64>,

    /// Minimum total actions for an area to enter a network.
    #[arg(long = "min-actions", value_name = "N", global = true)]
    min_actions: Option<u64>,

    /// Artifact output directory.
    #[arg(long, value_name = "DIR", global = true)]
    out: Option<PathBuf>,

    /// Cohort filter: keep patients at least this old.
    #[arg(long = "min-age", value_name = "YEARS", global = true)]
    min_age: Option<u32>,

    /// Keep patients who died in service instead of excluding them.
    #[arg(long = "keep-deaths", global = true)]
    keep_deaths: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with planted group structure.
    Synth,
    /// Filter the cohort and aggregate events into area-by-patient counts.
    Ingest,
    /// Co-cluster patients and operational areas into k groups.
    Cocluster,
    /// Build per-group coordination networks, metrics, and communities.
    Network,
    /// Fit the LOS regression, pairwise contrasts, and confounder balance.
    Stats,
    /// Assemble report.json from the other stages' artifacts.
    Report,
    /// Run every stage in order.
    All,
}

impl Command {
    fn stage(&self) -> Stage {
        match self {
            Command::Synth => Stage::Synth,
            Command::Ingest => Stage::Ingest,
            Command::Cocluster => Stage::Cocluster,
            Command::Network => Stage::Network,
            Command::Stats => Stage::Stats,
            Command::Report => Stage::Report,
            Command::All => Stage::All,
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) => 1,
        Error::SvdNoConvergence { .. } | Error::NonConvergence(_) => 3,
        _ => 2,
    }
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    exit_code(err)
}

/// Parse arguments, run the requested stage, and return the process exit
/// code. `args` must include the program name.
pub fn run<I, T>(args: I) -> i32
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
            let _ = e.print();
            return code;
        }
    };

    let mut config = match &cli.config {
        Some(path) => match pipeline::load_config(path) {
            Ok(config) => config,
            Err(e) => return fail(&e),
        },
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(k) = cli.k {
        config.k = k;
    }
    if let Some(tau) = cli.tau {
        config.tau = tau;
    }
    if let Some(min_actions) = cli.min_actions {
        config.min_actions = min_actions;
    }
    if let Some(out) = cli.out {
        config.out = out;
    }
    if let Some(min_age) = cli.min_age {
        config.min_age = min_age;
    }
    if cli.keep_deaths {
        config.exclude_deaths = false;
    }

    match pipeline::run_stage(&config, cli.command.stage()) {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}
