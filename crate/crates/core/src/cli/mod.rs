//! Batch command-line surface.
//!
//! Exit codes: 0 success, 1 parse or validation failure, 2 computation
//! failure, 3 I/O failure. Failures print one JSON line on stderr. Every
//! input is read and validated before anything is written, and outputs are
//! replaced atomically.

mod commands;
pub mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::data_model::io::ReadError;
use crate::index_numbers::BaseMode;
use crate::policy::GapBase;
use crate::translog::Estimator;

pub use output::{Format, Precision};
pub use report::{ReportConfig, ReportCrop};

/// Environment variable holding the default `--format`.
pub const FORMAT_ENV: &str = "AGRIPRICE_FORMAT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{0}")]
    Validation(String),
    #[error("{command}: {message}")]
    Computation {
        command: &'static str,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 1,
            CliError::Computation { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub(crate) fn computation(command: &'static str, err: impl std::fmt::Display) -> Self {
        CliError::Computation {
            command,
            message: err.to_string(),
        }
    }

    /// The single structured line printed on failure.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            path: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            line: Option<u64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            command: Option<&'a str>,
            message: String,
        }
        let line = match self {
            CliError::Parse { path, line, message } => Line {
                error: "parse",
                path: Some(path),
                line: Some(*line),
                command: None,
                message: message.clone(),
            },
            CliError::Validation(m) => Line {
                error: "validation",
                path: None,
                line: None,
                command: None,
                message: m.clone(),
            },
            CliError::Computation { command, message } => Line {
                error: "computation",
                path: None,
                line: None,
                command: Some(command),
                message: message.clone(),
            },
            CliError::Io { path, message } => Line {
                error: "io",
                path: Some(path),
                line: None,
                command: None,
                message: message.clone(),
            },
        };
        serde_json::to_string(&line).expect("error line serializes")
    }
}

impl From<ReadError> for CliError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::Io { path, source } => CliError::Io {
                path,
                message: source.to_string(),
            },
            ReadError::Parse {
                path,
                line,
                message,
            } => CliError::Parse {
                path,
                line,
                message,
            },
            ReadError::Invalid { path, source } => {
                CliError::Validation(format!("{path}: {source}"))
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "agriprice", version, about = "Crop productivity, cost-system and support-price analysis")]
pub struct Cli {
    /// Output format; defaults to the command's natural format.
    #[arg(long, global = true, env = FORMAT_ENV, value_enum)]
    pub format: Option<Format>,

    /// `table` writes fixed decimals per field; `full` keeps every digit.
    #[arg(long, global = true, value_enum, default_value_t = Precision::Table)]
    pub precision: Precision,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Törnqvist–Theil input, output and TFP indices from a panel CSV.
    Tfp(TfpArgs),
    /// Estimate a translog cost system from a cost-observation CSV.
    Fit(FitArgs),
    /// Allen and price elasticities from fitted coefficients.
    Elast(ElastArgs),
    /// Net effect and Strategic Support Price for a scenario.
    Policy(PolicyArgs),
    /// Combined multi-crop report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    /// Annual growth links, base year row at 1.
    #[default]
    Growth,
    /// Cumulative index levels.
    Index,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    #[default]
    Chain,
    FixedBase,
}

impl From<BaseArg> for BaseMode {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::Chain => BaseMode::Chain,
            BaseArg::FixedBase => BaseMode::FixedBase,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TfpArgs {
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Series::Growth)]
    pub series: Series,
    #[arg(long, value_enum, default_value_t = BaseArg::Chain)]
    pub base: BaseArg,
    /// Overrides the sidecar's base_year; defaults to the first panel year.
    #[arg(long)]
    pub base_year: Option<i32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    #[default]
    Ifgls,
    Srls,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Ifgls => Estimator::IteratedFeasibleGls,
            EstimatorArg::Srls => Estimator::StackedRestrictedLs,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long)]
    pub numeraire: String,
    /// Comma-separated inputs to model, in order; defaults to every
    /// `price_<item>` column.
    #[arg(long, value_delimiter = ',')]
    pub inputs: Option<Vec<String>>,
    /// Share equation left out of the system; defaults to the numeraire.
    #[arg(long)]
    pub drop: Option<String>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Ifgls)]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = 100)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ElastArgs {
    /// Output of `fit`, or a bare coefficient object.
    #[arg(long)]
    pub coeffs: PathBuf,
    /// `mean` (sample mean shares), `fitted` (model shares at the
    /// evaluation prices), or a list such as `labour=0.5,fert=0.2,machine=0.3`.
    #[arg(long, default_value = "mean")]
    pub shares: String,
    /// Evaluation prices as a list; defaults to the sample geometric mean.
    #[arg(long)]
    pub prices: Option<String>,
    /// Evaluation output level; defaults to the sample geometric mean.
    #[arg(long)]
    pub output_level: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Net-effect bounds as `lower,upper`.
    #[arg(long, allow_hyphen_values = true)]
    pub bounds: Option<String>,
    #[arg(long, value_enum)]
    pub gap_base: Option<GapBaseArg>,
    /// Apply the net effect at full precision instead of its reported
    /// two-decimal value.
    #[arg(long)]
    pub unrounded_net_effect: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GapBaseArg {
    Target,
    Msp,
}

impl From<GapBaseArg> for GapBase {
    fn from(g: GapBaseArg) -> Self {
        match g {
            GapBaseArg::Target => GapBase::Target,
            GapBaseArg::Msp => GapBase::Msp,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; receives `report.json` or `report.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let precision = cli.precision;
    match cli.command {
        Command::Tfp(args) => commands::tfp(&args, cli.format.unwrap_or(Format::Csv), precision),
        Command::Fit(args) => commands::fit(&args, cli.format.unwrap_or(Format::Json), precision),
        Command::Elast(args) => commands::elast(&args, cli.format.unwrap_or(Format::Csv), precision),
        Command::Policy(args) => {
            commands::policy(&args, cli.format.unwrap_or(Format::Json), precision)
        }
        Command::Report(args) => report::run(&args, cli.format.unwrap_or(Format::Json), precision),
    }
}

/// Parses arguments, runs, and maps the outcome to the exit-code contract.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Validation(e.to_string().trim().replace('\n', " "));
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json_line());
            ExitCode::from(err.exit_code())
        }
    }
}
