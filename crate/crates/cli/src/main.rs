//! `cliquelog` — deterministic command-line pipeline for association
//! discovery in binary contingency tables: ingest a matrix, prune the
//! connectivity graph, run the stochastic model search, and report
//! Bayes-model-averaged association graphs and existence probabilities.

mod manifest;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Association discovery via clique loglinear models over sparse binary
/// contingency tables.
#[derive(Parser)]
#[command(name = "cliquelog", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum InputFormat {
    /// Binary observation matrix, CSV or TSV, optional header row.
    Matrix,
    /// Aggregated cells, one `<bitstring>,<count>` line each.
    Cells,
    /// Count matrix; thresholded to binary at `--binarize-threshold`.
    Counts,
}

impl InputFormat {
    pub(crate) fn name(self) -> &'static str {
        match self {
            InputFormat::Matrix => "matrix",
            InputFormat::Cells => "cells",
            InputFormat::Counts => "counts",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum HeaderMode {
    /// Header if the first line holds any non-numeric token.
    Auto,
    Yes,
    No,
}

impl HeaderMode {
    pub(crate) fn as_option(self) -> Option<bool> {
        match self {
            HeaderMode::Auto => None,
            HeaderMode::Yes => Some(true),
            HeaderMode::No => Some(false),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Read an observation matrix and write an aggregated table file.
    Ingest {
        /// Input matrix or cell file.
        input: PathBuf,
        #[arg(long, value_enum, default_value = "matrix")]
        format: InputFormat,
        /// Count threshold for binarization; implies `--format counts`.
        #[arg(long)]
        binarize_threshold: Option<u64>,
        #[arg(long, value_enum, default_value = "auto")]
        header: HeaderMode,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Build the connectivity graph, drop isolated variables, report
    /// vertex degrees.
    Preprocess {
        /// Aggregated table file (from `ingest`).
        table: PathBuf,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Run the stochastic model search and collect the visited models.
    Search {
        /// Aggregated table file.
        table: PathBuf,
        #[arg(long, default_value_t = 100)]
        chains: usize,
        /// Iterations per chain.
        #[arg(long, default_value_t = 100_000)]
        iters: usize,
        /// Occam's window constant.
        #[arg(long, default_value_t = 1e-4)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for parallel chains; 0 = all cores. The output
        /// does not depend on this value.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Window a search bag and emit Bayes-model-averaged reports.
    Bma {
        /// Bag file (from `search`).
        bag: PathBuf,
        /// Aggregated table file the bag was collected on.
        table: PathBuf,
        /// Occam's window constant.
        #[arg(long, default_value_t = 1e-4)]
        c: f64,
        /// Minimum posterior probability for a reported edge (strict).
        #[arg(long, default_value_t = 0.1)]
        edge_threshold: f64,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Generate a planted-clique benchmark matrix from a spec file.
    Simulate {
        /// JSON spec: {"b","r","planted","p_in","p_bg","clique_row_fraction","seed"}.
        spec: PathBuf,
        /// Flip each 0 to 1 with this probability after generation.
        #[arg(long, default_value_t = 0.0)]
        noise_flip: f64,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Print the number of clique loglinear model shapes on B variables.
    CountModels { b: usize },
    /// Compare two edge reports (e.g. from two populations).
    Diff {
        edges1: PathBuf,
        edges2: PathBuf,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
}

/// Errors mapped to exit codes: 2 input, 3 no valid model, 4 internal.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    NoValidModel(String),
    Internal(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::NoValidModel(_) => "no-valid-model",
            CliError::Internal(_) => "internal",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::NoValidModel(m) | CliError::Internal(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::NoValidModel(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<cliquelog::Error> for CliError {
    fn from(err: cliquelog::Error) -> Self {
        match err {
            cliquelog::Error::NoValidModel(m) => CliError::NoValidModel(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { input, format, binarize_threshold, header, output_dir } => {
            pipeline::cmd_ingest(&input, format, binarize_threshold, header, &output_dir)
        }
        Command::Preprocess { table, output_dir } => {
            pipeline::cmd_preprocess(&table, &output_dir)
        }
        Command::Search { table, chains, iters, c, seed, workers, output_dir } => {
            pipeline::cmd_search(&table, chains, iters, c, seed, workers, &output_dir)
        }
        Command::Bma { bag, table, c, edge_threshold, output_dir } => {
            pipeline::cmd_bma(&bag, &table, c, edge_threshold, &output_dir)
        }
        Command::Simulate { spec, noise_flip, output_dir } => {
            pipeline::cmd_simulate(&spec, noise_flip, &output_dir)
        }
        Command::CountModels { b } => pipeline::cmd_count_models(b),
        Command::Diff { edges1, edges2, output_dir } => {
            pipeline::cmd_diff(&edges1, &edges2, &output_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // one machine-readable JSON object on stderr
            eprintln!(
                "{}",
                serde_json::json!({ "error": err.kind(), "message": err.message() })
            );
            ExitCode::from(err.exit_code())
        }
    }
}
