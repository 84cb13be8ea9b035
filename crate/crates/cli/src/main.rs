//! `labelsift`: find activity labels that name the same thing.
//!
//! Exit codes: 0 on success (also when nothing is found), 1 for bad flags,
//! config files or parameter values, 2 when a file cannot be read, parsed or
//! written. Failures are reported on stderr as a JSON object
//! `{"error": {"kind", "exit_code", "message"}}`.

mod commands;
mod config;
mod error;
mod input;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use config::FileConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "labelsift", version, about = "Detect redundant activity labels in event logs")]
pub struct Cli {
    /// Flat `key = value` file with defaults for any long flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: number of cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Master seed for perturbation and evaluation
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format on standard output
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
    Dot,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every label pair and report the redundant ones
    Detect(commands::DetectArgs),
    /// Plant synthetic duplicate labels in a log
    Perturb(commands::PerturbArgs),
    /// Run the perturbation grid and score detection against it
    Evaluate(commands::EvaluateArgs),
    /// Write the directly- or indirectly-follows graph
    ExportDfg(commands::ExportArgs),
}

const GLOBAL_KEYS: &[&str] = &["threads", "seed", "format"];

/// Global settings after merging flags and the config file.
pub struct Global {
    pub file: FileConfig,
    pub seed: Option<u64>,
    pub format: Option<Format>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    commands::check_config(&file)?;
    let threads = match file.pick(cli.threads, "threads")? {
        Some(0) => return Err(CliError::config("--threads must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot start {threads} threads: {e}")))?;
    let global = Global {
        seed: file.pick(cli.seed, "seed")?,
        format: file.pick(cli.format, "format")?,
        file,
    };
    match cli.command {
        Command::Detect(args) => commands::detect(args, &global),
        Command::Perturb(args) => commands::perturb(args, &global),
        Command::Evaluate(args) => commands::evaluate(args, &global),
        Command::ExportDfg(args) => commands::export_dfg(args, &global),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.kind.exit_code() as u8)
        }
    }
}
