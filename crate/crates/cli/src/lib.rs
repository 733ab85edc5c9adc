//! Command-line front end: file formats, commands and report emission.
//!
//! Every command prints one JSON report to standard output and returns an
//! exit code from a fixed contract: 0 success or pass, 2 invalid input,
//! 3 check failed, 4 solver failure, 5 undecided.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

pub mod commands;
pub mod files;
pub mod json;
pub mod strict;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FAILED: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_UNDECIDED: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError::input(message)
    }
}

impl From<ecl_core::Error> for CliError {
    fn from(e: ecl_core::Error) -> Self {
        let code = match e {
            ecl_core::Error::NoConvergence { .. } => EXIT_SOLVER,
            ecl_core::Error::Undecided(_) => EXIT_UNDECIDED,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// A finished command: its exit code and the report for standard output.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
}

impl Outcome {
    pub fn ok(report: Value) -> Self {
        Outcome { code: EXIT_OK, report }
    }

    pub fn with(code: i32, report: Value) -> Self {
        Outcome { code, report }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeFlag {
    Bayes,
    Maximin,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommFlag {
    Full,
    Private,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "ecl", version, about = "Equilibria, cores and rational expectations in finite-state exchange economies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an economy file and report which assumptions hold.
    Validate { economy: PathBuf },
    /// Solve the Walrasian equilibrium of every state.
    Solve {
        economy: PathBuf,
        /// Directory for allocation.json and prices.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sup-norm tolerance on excess demand.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Decide ex-post core membership state by state.
    CheckExpost {
        economy: PathBuf,
        allocation: PathBuf,
        /// Minimum utility gain that counts as blocking.
        #[arg(long, default_value_t = ecl_core::blocking::EPS_BLOCK)]
        tol: f64,
        /// Rounds of the coalition weight search.
        #[arg(long, default_value_t = 60)]
        budget: usize,
        /// Also run the grid oracle with this step (tiny instances only).
        #[arg(long)]
        oracle_step: Option<f64>,
        /// Re-verify this certificate instead of searching.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Verify a rational expectations equilibrium.
    CheckRee {
        economy: PathBuf,
        allocation: PathBuf,
        prices: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeFlag::Both)]
        mode: ModeFlag,
        /// Tolerance on utility comparisons.
        #[arg(long, default_value_t = ecl_core::ree::REE_TOL)]
        tol: f64,
    },
    /// Search for a fine block.
    CheckFine {
        economy: PathBuf,
        allocation: PathBuf,
        #[arg(long, value_enum, default_value_t = CommFlag::Full)]
        comm: CommFlag,
        /// Most (coalition, event) programs examined.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = ecl_core::blocking::EPS_BLOCK)]
        tol: f64,
        /// Re-verify this certificate instead of searching.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Reproduce the two-type example economy with identical states.
    DemoExample3 {
        #[arg(long, default_value_t = 4)]
        states: usize,
        /// Directory for the economy, allocation and prices.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded conforming economy.
    Gen {
        #[arg(long, default_value_t = 3)]
        types: usize,
        #[arg(long, default_value_t = 2)]
        goods: usize,
        #[arg(long, default_value_t = 2)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        atoms: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace every atom by an atomless type with the same characteristics.
    SplitAtoms {
        economy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search seeded one-atom economies for an ex-post core allocation that
    /// is not a rational expectations equilibrium allocation.
    DemoStrict {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Seeds tried, starting at --seed.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Candidate supporting prices per economy.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Directory for the economy, allocation, prices and certificate.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the ex-post and fine checks on random allocations of economies
    /// with one atom or with heterogeneous atoms. Reports counts only.
    ExperimentAtoms {
        #[arg(long, default_value_t = 1)]
        atoms: usize,
        /// Perturb each atom's endowment so atoms differ.
        #[arg(long)]
        heterogeneous: bool,
        #[arg(long, default_value_t = 20)]
        count: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2_000)]
        budget: usize,
    },
}

/// Caps the global worker pool at `ECL_THREADS` when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ECL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("ECL_THREADS must be a positive integer, got {raw:?}")))?;
    // A pool built earlier in the process wins; that only happens in tests.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    commands::dispatch(command)
}

/// Parses `args`, runs the command, writes the report to `out` and any
/// error to `err`, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    if let Err(e) = init_threads() {
        let _ = writeln!(err, "error: {}", e.message);
        return e.code;
    }
    match execute(&cli.command) {
        Ok(o) => {
            let _ = out.write_all(json::to_string(&o.report).as_bytes());
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
