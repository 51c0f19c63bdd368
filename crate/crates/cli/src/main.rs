//! `benchfold`: build benchmark taskfolders, run them, query metadata and
//! regenerate reports.

mod cmd;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::CliConfig;

#[derive(Parser, Debug)]
#[command(name = "benchfold", version, about = "Benchmark taskfolder builder and supervised runner")]
struct Cli {
    /// Configuration file [default: ./benchfold.toml if present]
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only print errors
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a taskfolder from a problem, instances and backends
    Create(CreateArgs),
    /// Run every job of a taskfolder under supervision
    Run(RunArgs),
    /// Evaluate triple patterns against a metadata file
    Query(QueryArgs),
    /// Regenerate index.html and/or timings.csv from results.xml
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
pub struct CreateArgs {
    /// Resource root containing the SD-tables
    #[arg(long, value_name = "DIR")]
    pub resources: Option<PathBuf>,
    /// Extra registry file, merged over the built-in one (repeatable)
    #[arg(long = "registry", value_name = "FILE")]
    pub registries: Vec<PathBuf>,
    /// Turtle metadata used by --query
    #[arg(long, value_name = "FILE")]
    pub metadata: Option<PathBuf>,
    /// Computation problem
    #[arg(long)]
    pub problem: Option<String>,
    /// Comma-separated `Table/Name` or bare names
    #[arg(long, value_delimiter = ',')]
    pub instances: Vec<String>,
    /// Comma-separated backend names
    #[arg(long, value_delimiter = ',')]
    pub backends: Vec<String>,
    /// Output directory; must not exist or be empty
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Preselect instances by a metadata property, e.g. "hasDegree <= 36"
    #[arg(long, value_name = "FILTER")]
    pub query: Option<String>,
    /// Task name [default: output directory name]
    #[arg(long)]
    pub name: Option<String>,
    /// Time utility recorded in machinesettings.xml
    #[arg(long, value_name = "CMD")]
    pub time_command: Option<String>,
    /// Per-machine invocation override, `backend=COMMAND` (repeatable)
    #[arg(long = "invocation", value_name = "BACKEND=CMD")]
    pub invocations: Vec<String>,
    /// Environment variable for the jobs, `NAME=VALUE` (repeatable)
    #[arg(long = "env", value_name = "NAME=VALUE")]
    pub env: Vec<String>,
    /// Ask for problem, instances and backends on the terminal
    #[arg(short, long)]
    pub interactive: bool,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Taskfolder to run
    pub folder: PathBuf,
    /// Wall-clock limit per job, seconds
    #[arg(long, value_name = "SECONDS")]
    pub time_limit: Option<String>,
    /// Resident memory limit per job, MB
    #[arg(long, value_name = "MB")]
    pub mem_limit: Option<u64>,
    /// Seconds between SIGTERM and SIGKILL [default: 5]
    #[arg(long, value_name = "SECONDS")]
    pub grace: Option<String>,
    /// Continue a previous run in this results directory
    #[arg(long, value_name = "RESULTS_DIR")]
    pub resume: Option<PathBuf>,
    /// Jobs run at once; above 1 timings are marked non-comparable
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
}

#[derive(Args, Debug, Default)]
pub struct QueryArgs {
    /// Turtle file
    #[arg(long, value_name = "FILE")]
    pub metadata: Option<PathBuf>,
    /// Triple pattern such as `?s sd:hasDegree ?d` (repeatable, conjunctive)
    #[arg(long = "pattern", required = true)]
    pub patterns: Vec<String>,
    /// Numeric comparison on a variable, e.g. `?d <= 36` (repeatable)
    #[arg(long = "filter")]
    pub filters: Vec<String>,
}

#[derive(Args, Debug, Default)]
pub struct ReportArgs {
    /// Results directories (several for a multi-run timings table)
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Regenerate index.html
    #[arg(long)]
    pub html: bool,
    /// Write timings.csv
    #[arg(long)]
    pub timings: bool,
    /// Where to write the timings [default: <dir>/timings.csv, or ./timings.csv for several runs]
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = CliConfig::load(cli.config.as_deref());
    init_logging(&cli, config.as_ref().ok());
    let result = config
        .map_err(anyhow::Error::new)
        .and_then(|config| match cli.command {
            Command::Create(args) => cmd::create::run(args, &config),
            Command::Run(args) => cmd::run::run(args, &config),
            Command::Query(args) => cmd::query::run(args, &config),
            Command::Report(args) => cmd::report::run(args),
        });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let (code, line) = failure::report(&e);
            eprintln!("{line}");
            ExitCode::from(u8::try_from(code).unwrap_or(1))
        }
    }
}

fn init_logging(cli: &Cli, config: Option<&CliConfig>) {
    let level = if cli.quiet {
        "error"
    } else {
        match cli.verbose {
            0 => config.and_then(|c| c.verbosity.as_deref()).unwrap_or("info"),
            1 => "debug",
            _ => "trace",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
}
