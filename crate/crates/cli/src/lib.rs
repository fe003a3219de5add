//! The `intff` command-line tool: data fetching, training, evaluation,
//! corruption, self-checks, and side-by-side comparisons.

mod commands;
mod error;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK};
pub use manifest::{dataset_checksums, manifest_path_for, RunManifest, TOOL_VERSION};

/// Environment variable naming the default MNIST directory.
pub const DATA_DIR_ENV: &str = "INTFF_DATA_DIR";
/// Environment variable overriding the download mirror.
pub const MIRROR_ENV: &str = "INTFF_MNIST_MIRROR";

#[derive(Debug, Parser)]
#[command(name = "intff", version, about = "Integrated Forward-Forward experiments on MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download the four MNIST files and verify their checksums.
    FetchData(commands::fetch::Args),
    /// Train a model and write it with its metrics and run manifest.
    Train(commands::train::Args),
    /// Evaluate a saved model on a test set.
    Eval(commands::eval::Args),
    /// Write a corrupted copy of a training set.
    Corrupt(commands::corrupt::Args),
    /// Finite-difference checks of every analytic gradient.
    Gradcheck(commands::checks::GradcheckArgs),
    /// Stop-gradient oracle and FF reduction checks on random small models.
    OracleCheck(commands::checks::OracleArgs),
    /// Train IntFF, FF and BP on one dataset and seed and tabulate them.
    Compare(commands::compare::Args),
}

fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

/// Parses `args` and runs the chosen subcommand, returning the process exit
/// code. Failures print exactly one line to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("intff: {}", line.trim_start_matches("error: ").trim());
            return EXIT_CONFIG;
        }
    };
    let result = match cli.command {
        Command::FetchData(a) => commands::fetch::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Corrupt(a) => commands::corrupt::run(a),
        Command::Gradcheck(a) => commands::checks::run_gradcheck(a),
        Command::OracleCheck(a) => commands::checks::run_oracle(a),
        Command::Compare(a) => commands::compare::run(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("intff: {}", e.one_line());
            e.code
        }
    }
}
