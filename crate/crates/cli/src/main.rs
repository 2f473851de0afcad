//! `nmm`: nested Markov models over ADMGs from the command line.
//!
//! Exit codes: 0 success, 1 I/O or schema errors, 2 numerical/model
//! errors, 3 census mismatch.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nmm", version, about = "Nested Markov models over acyclic directed mixed graphs")]
struct Cli {
    /// Worker threads (default: available cores). Outputs do not depend
    /// on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for anything randomized.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Outer fit convergence tolerance (max parameter change per cycle).
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol: f64,
    /// Cap on coordinate-ascent cycles per fit.
    #[arg(long, global = true, default_value_t = 500)]
    max_cycles: usize,
    /// Additive smoothing applied to every data cell (off unless set;
    /// zero counts are an error without it).
    #[arg(long, global = true)]
    smoothing: Option<f64>,
    /// Write over existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Output file (stdout when omitted); commands with several outputs
    /// treat this as the primary one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a graph to data by maximum likelihood; prints a fit JSON.
    Fit {
        /// Graph JSON file.
        graph: PathBuf,
        /// Data CSV file (header of variables, optional final `count`).
        data: PathBuf,
    },
    /// Fit and report only the scores of one graph.
    Score {
        graph: PathBuf,
        data: PathBuf,
    },
    /// BIC structure search over ADMGs; prints a search report JSON.
    Search {
        data: PathBuf,
        /// Optional starting graph JSON (default: empty graph).
        #[arg(long)]
        start: Option<PathBuf>,
        /// Cap on plateau expansions.
        #[arg(long, default_value_t = 20_000)]
        max_expansions: usize,
    },
    /// Structure-recovery experiment on a latent-DAG generator; writes
    /// a recovery CSV.
    Simulate {
        /// Generator name: verma4 or chain5.
        model: String,
        /// Sample sizes, comma separated.
        #[arg(long, default_value = "500,2500,5000")]
        sizes: String,
        /// Repetitions per sample size.
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Faithfulness floor on every implied dependence.
        #[arg(long, default_value_t = 0.005)]
        gap: f64,
        /// Faithfulness floor on adjacent pairs.
        #[arg(long, default_value_t = 0.05)]
        edge_gap: f64,
        /// Dirichlet concentration for conditional table rows.
        #[arg(long, default_value_t = 0.15)]
        alpha: f64,
        /// Also write every trial's conditional tables to this JSON file.
        #[arg(long)]
        dump_cpts: Option<PathBuf>,
    },
    /// Exhaustive census of n-vertex ADMGs; writes a CSV and prints the
    /// summary JSON. At n = 4 the headline counts are verified.
    Census {
        #[arg(short, default_value_t = 4)]
        n: usize,
        /// Census CSV path (skipped when omitted).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Apply a kernel fixing sequence to a joint table and print the
    /// resulting kernel CSV.
    Kernel {
        graph: PathBuf,
        /// Joint CSV with a final `p` column.
        joint: PathBuf,
        /// Comma-separated vertex names to fix, in order.
        #[arg(long)]
        fix: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        // Ignore failure: the pool may already be initialized in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub(crate) struct CmdError {
    pub code: u8,
    pub message: String,
}

impl CmdError {
    fn io(message: impl Into<String>) -> CmdError {
        CmdError { code: 1, message: message.into() }
    }

    fn model(message: impl Into<String>) -> CmdError {
        CmdError { code: 2, message: message.into() }
    }

    fn census(message: impl Into<String>) -> CmdError {
        CmdError { code: 3, message: message.into() }
    }
}
