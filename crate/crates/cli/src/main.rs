mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use indet_core::CoreError;
use serde::Serialize;

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_BREACH: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Input(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::ToleranceBreach(_)) => EXIT_BREACH,
            _ => EXIT_INVALID,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(msg) => write!(f, "{msg}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "indet", version, about = "Independence and indetermination couplings from the command line")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Input CSV files start with a header row; output CSV gets one.
    #[arg(long, global = true)]
    pub header: bool,

    /// Print the report as JSON on stdout (default).
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,

    /// Print the main table as CSV on stdout; the report goes to stderr
    /// or to the output directory.
    #[arg(long, global = true)]
    pub csv: bool,

    /// Directory receiving tables and the report.
    #[arg(long, global = true, env = "INDET_OUTPUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the independence or indetermination coupling of two margins.
    Couple(commands::CoupleArgs),
    /// Test whether a matrix has equal diagonal sums on every adjacent 2x2 block.
    CheckMonge(commands::MongeArgs),
    /// Draw pairs from the indetermination coupling.
    Draw(commands::DrawArgs),
    /// Association criteria of a contingency table or of two labelings.
    Criteria(commands::CriteriaArgs),
    /// Maximize a modularity criterion on a weighted graph.
    Cluster(commands::ClusterArgs),
    /// Guessing moments and one-shot bounds for a joint law.
    Guess(commands::GuessArgs),
    /// Workload moments and one-shot bounds of a task partition.
    Tasks(commands::TasksArgs),
    /// Continuous indetermination density and distribution function.
    Continuous(commands::ContinuousArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    #[value(name = "x", alias = "times", alias = "independence")]
    Times,
    #[value(name = "plus", alias = "indetermination")]
    Plus,
}

/// Everything a run produced, for the report.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Vec<io::InputFile>,
    pub seed: Option<u64>,
    pub outputs: serde_json::Value,
    pub version: String,
}

/// What a command hands back: its outputs and an optional CSV table.
pub struct Outcome {
    pub seed: Option<u64>,
    pub outputs: serde_json::Value,
    /// File name and content of the main table.
    pub table: Option<(String, String)>,
    /// Extra files written only to the output directory.
    pub extra: Vec<(String, String)>,
}

pub fn version_string() -> String {
    format!("indet {} ({})", env!("CARGO_PKG_VERSION"), indet_core::rng::GENERATOR_VERSION)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut loader = io::Loader::new(cli.common.header);
    let (name, outcome) = commands::dispatch(&cli.command, &cli.common, &mut loader)?;
    let mut outcome = outcome;
    if let (Some(dir), Some((file, content))) = (&cli.common.out_dir, &outcome.table) {
        let path = io::write_file(dir, file, content)?;
        if let serde_json::Value::Object(map) = &mut outcome.outputs {
            map.insert("table_path".into(), serde_json::Value::String(path.display().to_string()));
        }
    }
    if let Some(dir) = &cli.common.out_dir {
        for (file, content) in &outcome.extra {
            io::write_file(dir, file, content)?;
        }
    }
    let report = RunReport {
        command: name.to_string(),
        inputs: loader.inputs,
        seed: outcome.seed,
        outputs: outcome.outputs,
        version: version_string(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(dir) = &cli.common.out_dir {
        io::write_file(dir, &format!("{name}.report.json"), &format!("{json}\n"))?;
    }
    match (&outcome.table, cli.common.csv) {
        (Some((_, content)), true) => {
            print!("{content}");
            if cli.common.out_dir.is_none() {
                eprintln!("{json}");
            }
        }
        _ => println!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
