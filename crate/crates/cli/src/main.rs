//! `datatrace`: batch front end for influence tracing.
//!
//! stdout carries the primary artifact of each subcommand (JSON or a table);
//! logs and errors go to stderr. Exit codes: 0 success, 1 input or
//! configuration error, 2 pipeline error, 3 provider error.

mod commands;
mod config;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use datatrace_core::{Error, ErrorClass};

use config::CommonArgs;

#[derive(Debug, Parser)]
#[command(
    name = "datatrace",
    version,
    about = "Trace generated images back to their training data"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a TF-IDF index over the manifest captions.
    Index,
    /// Rank training captions against a prompt.
    Retrieve {
        #[arg(long)]
        prompt: String,
    },
    /// Attribute a generated image to training samples.
    Trace(commands::TraceArgs),
    /// Write the exclusion manifest and before/after similarity statistics.
    Evaluate(commands::EvaluateArgs),
    /// Run the closed loop on the toy generator.
    Simulate(commands::SimulateArgs),
    /// Search the web for each prompt and compare the results with the generated images.
    Websearch(commands::WebsearchArgs),
    /// Write the procedural shape corpus used by the tests and examples.
    Fixture {
        #[arg(long, default_value_t = datatrace_core::fixture::DEFAULT_FIXTURE_SIZE)]
        count: usize,
    },
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Input => 1,
        ErrorClass::Pipeline => 2,
        ErrorClass::Provider => 3,
    }
}

fn report_error(err: &Error) -> ExitCode {
    let body = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
    let _ = writeln!(std::io::stderr(), "{body}");
    ExitCode::from(exit_code(err.class()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return report_error(&Error::InvalidConfig(e.kind().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

fn run(cli: Cli) -> datatrace_core::Result<()> {
    let config = config::RunConfig::resolve(&cli.common)?;
    match cli.command {
        Command::Index => commands::index(&config),
        Command::Retrieve { prompt } => commands::retrieve(&config, &prompt),
        Command::Trace(args) => commands::trace(&config, &args),
        Command::Evaluate(args) => commands::evaluate(&config, &args),
        Command::Simulate(args) => commands::simulate(&config, &args),
        Command::Websearch(args) => commands::websearch(&config, &args),
        Command::Fixture { count } => {
            let dir: PathBuf = config::RunConfig::require(&config.out_dir, "out-dir")?.to_path_buf();
            commands::fixture(&dir, count, config.seed)
        }
    }
}
