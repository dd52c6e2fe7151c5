//! `cplx` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 bundle or metadata problem,
//! 3 statistical degeneracy (with `--strict`, or when a test has an empty group).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cplx_core::IngestError;

mod commands;
pub mod output;

#[derive(Debug, Parser)]
#[command(name = "cplx", version, about = "Per-example data-complexity indicators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a bundle and report tied-plurality items.
    Validate {
        #[arg(long)]
        bundle: PathBuf,
        /// Also write the report to `<out>/validate.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute every indicator for every item.
    Indicators {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        alphas: AlphaArgs,
    },
    /// Spearman tables between indicators.
    Correlate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        alphas: AlphaArgs,
        /// Add tables restricted to items the pool fails or succeeds on, plus a point cloud.
        #[arg(long)]
        partition: bool,
        /// Also write R² tables.
        #[arg(long)]
        r2: bool,
        #[command(flatten)]
        rule: RuleArgs,
        /// Reference-free indicator on the point-cloud x axis [default: M_CP at the smallest alpha].
        #[arg(long)]
        x: Option<String>,
        /// Reference-dependent indicator on the point-cloud y axis.
        #[arg(long, default_value = "M_1st_layer")]
        y: String,
        /// Exit with code 3 if any table cell is degenerate.
        #[arg(long)]
        strict: bool,
    },
    /// Mann-Whitney U tests: dissensus of failed vs succeeded items, or model-relatedness groupings.
    Utest {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// same_plm, same_split or param_diff; omit for the dissensus-vs-failure test.
        #[arg(long)]
        grouping: Option<String>,
        #[command(flatten)]
        rule: RuleArgs,
        /// two-sided, greater or less.
        #[arg(long, default_value = "two-sided")]
        alternative: String,
    },
    /// Write a seeded synthetic bundle.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        items: usize,
        #[arg(long, default_value_t = 5)]
        models: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Checkpoints per model: one value, or one per model.
        #[arg(long, value_delimiter = ',', default_value = "3")]
        checkpoints: Vec<usize>,
        /// Layers per model: one value, or one per model.
        #[arg(long, value_delimiter = ',', default_value = "4")]
        layers: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        annotators: u32,
        #[arg(long, default_value_t = 0.6)]
        ambiguity: f64,
        /// aligned, argmax_aligned, anti_aligned, inverted_u or independent.
        #[arg(long, default_value = "aligned")]
        coupling: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct AlphaArgs {
    /// Conformal risk levels.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RuleArgs {
    /// Pool failure rate above which an item counts as failed.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Count a failure rate equal to the threshold as failed.
    #[arg(long)]
    pub inclusive: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("missing model metadata: {0}")]
    MissingMetadata(&'static str),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Ingest(_) | CliError::MissingMetadata(_) | CliError::Output { .. } => 2,
            CliError::Degenerate(_) => 3,
        }
    }

    /// Stable machine-readable class.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Ingest(e) => e.code(),
            CliError::MissingMetadata(_) => "missing_metadata",
            CliError::Output { .. } => "output_failure",
            CliError::Degenerate(_) => "degenerate",
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Output { path: path.to_path_buf(), message: e.to_string() }
    }

    pub(crate) fn csv(path: &Path, e: csv::Error) -> Self {
        CliError::Output { path: path.to_path_buf(), message: e.to_string() }
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{rendered}") } else { write!(stderr, "{rendered}") };
            return code;
        }
    };
    match commands::dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}
