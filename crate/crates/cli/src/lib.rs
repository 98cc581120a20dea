//! The `mushra` command-line tool.
//!
//! Every command is deterministic given its inputs, flags and `--seed`.
//! Tabular results go to `--out` (or stdout) as CSV or JSON; when `--out`
//! is given a `<out>.report.json` sidecar records the command, input
//! digests, seed and output paths.
//!
//! Exit codes: 0 success, 1 validation or usage failure, 2 I/O failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mushra_core::analysis::CorrelationMethod;
use thiserror::Error;

mod commands;
pub mod report;
pub mod table;

pub use commands::{parse_axis, parse_grid, parse_lambdas};
pub use report::CliReport;
pub use table::{OutputFormat, Table};

/// Seed used when `--seed` is not given; always logged and recorded.
pub const DEFAULT_SEED: u64 = 0;

/// Column mapping for the released MANGO rating files, selected with
/// `--mapping mango`.
pub const MANGO_MAPPING_JSON: &str = include_str!("../data/mango_mapping.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] mushra_core::Error),
    #[error(transparent)]
    Server(#[from] mushra_server::ServerError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mushra_core::Error as E;
        use mushra_server::ServerError as S;
        match self {
            CliError::Io(_)
            | CliError::Core(E::Io { .. })
            | CliError::Server(S::Io(_))
            | CliError::Server(S::Core(E::Io { .. })) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mushra", version, about = "Assemble, serve and analyse MUSHRA-family listening tests")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every randomised step (default 0)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write JSON (an array of row objects)
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    /// Write CSV (default unless --out ends in .json)
    #[arg(long, global = true)]
    pub csv: bool,
    /// Run on the calling thread only
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Continue when some dataset rows fail validation
    #[arg(long, global = true)]
    pub allow_rejects: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Ratings file (.csv or .jsonl)
    #[arg(long)]
    pub dataset: PathBuf,
    /// Column mapping JSON, or `mango` for the bundled MANGO mapping
    #[arg(long)]
    pub mapping: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Filters {
    #[arg(long)]
    pub language: Option<String>,
    /// Test variant, e.g. MUSHRA or MUSHRA_DG_NMR
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub campaign: Option<String>,
    /// Keep only these systems (repeatable)
    #[arg(long = "system")]
    pub systems: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupBy {
    System,
    Rater,
    Utterance,
    Language,
    Variant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistributionBy {
    Rater,
    Utterance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Pearson,
    Spearman,
}

impl From<Method> for CorrelationMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Pearson => CorrelationMethod::Pearson,
            Method::Spearman => CorrelationMethod::Spearman,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a ratings file; with --out, also write the canonical export
    Ingest {
        #[command(flatten)]
        data: DatasetArgs,
    },
    /// Write canonical <out>.csv and <out>.jsonl
    Export {
        #[command(flatten)]
        data: DatasetArgs,
    },
    /// Mean, standard deviation, 95% CI and quality bin per group
    Summarize {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        filters: Filters,
        #[arg(long, value_enum, default_value = "system")]
        by: GroupBy,
        /// Apply the standard hidden-reference screening first
        #[arg(long)]
        screen: bool,
    },
    /// Hidden-reference post-screening, or a threshold sweep with --lambda
    Screen {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        filters: Filters,
        /// Thresholds as a list (`0,10,20`) or range (`0:100:10`)
        #[arg(long)]
        lambda: Option<String>,
        /// Rejection fraction for the standard rule
        #[arg(long, default_value_t = 0.15)]
        fraction: f64,
        #[arg(long, default_value_t = 90.0)]
        threshold: f64,
    },
    /// Mean Spearman correlation of subsampled system means
    Sensitivity {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        filters: Filters,
        /// `K_AXIS:M_AXIS`, each a list with optional `all`; e.g. `5,10,all:10,50,all`
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        screen: bool,
    },
    /// Per-rater or per-utterance five-number summaries (long format)
    Distributions {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        filters: Filters,
        #[arg(long, value_enum, default_value = "rater")]
        by: DistributionBy,
    },
    /// Correlate two numeric columns of a CSV file
    Correlate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, value_enum, default_value = "pearson")]
        method: Method,
    },
    /// Per-attribute error rates and perceptual means of DG scoresheets
    Faults {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        filters: Filters,
    },
    /// CMOS preference percentages per system
    Cmos {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        filters: Filters,
    },
    /// Time per page normalised by audio duration (input: page timings)
    Timing {
        /// Page timings (.jsonl or .csv), as served by the admin timings endpoint
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Rater counts by language, gender and age band (input: rater profiles)
    Demographics {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Derive an Anchor-X clip from a WAV file
    Anchor { input: PathBuf, output: PathBuf },
    /// Assemble blinded pages for every rater of a plan
    Assemble {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 1)]
        raters: usize,
        /// Audio tree laid out as <root>/<system>/<utterance>.wav; omitted = dry run
        #[arg(long)]
        audio_root: Option<PathBuf>,
    },
    /// Run the listening-test server
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write the DG scoring test vectors
    DgVectors,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Export { .. } => "export",
            Command::Summarize { .. } => "summarize",
            Command::Screen { .. } => "screen",
            Command::Sensitivity { .. } => "sensitivity",
            Command::Distributions { .. } => "distributions",
            Command::Correlate { .. } => "correlate",
            Command::Faults { .. } => "faults",
            Command::Cmos { .. } => "cmos",
            Command::Timing { .. } => "timing",
            Command::Demographics { .. } => "demographics",
            Command::Anchor { .. } => "anchor",
            Command::Assemble { .. } => "assemble",
            Command::Serve { .. } => "serve",
            Command::DgVectors => "dg-vectors",
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    commands::dispatch(cli)
}
