//! `cover`: corrupt images, score logit tables, evaluate and select
//! corruptions, and run the analytic and synthetic experiments.

mod commands;
mod config;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use cover_core::mutation::RadiusBasis;
use cover_core::{CorruptionKind, DimensionSet, ScoreKind};

/// Exit status 1: the command was well-formed but failed.
/// Exit status 2: bad flags, values or config.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(name = "cover", version, about = "Confidence averaging over corrupted views for OOD detection")]
pub struct Cli {
    /// TOML file whose keys mirror long flags, top level or under a
    /// `[subcommand]` table. Flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Apply one corruption to an image and write a PNG.
    Corrupt {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: CorruptionKind,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        severity: u8,
        #[arg(long, env = "COVER_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Per-sample CoVer scores of a logit table, as NDJSON.
    Score {
        #[arg(long)]
        logits: PathBuf,
        /// Comma list such as `original,brightness:1,fog:2`.
        #[arg(long, default_value = "original", value_parser = parse_dims)]
        dims: DimensionSet,
        #[command(flatten)]
        scoring: ScoringArgs,
        /// Defaults to stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// AUROC and FPR at a TPR target from score files.
    Eval {
        /// Score NDJSON routed by each record's `split`.
        #[arg(long)]
        scores: Vec<PathBuf>,
        /// Scores taken as ID (records of the other split are skipped).
        #[arg(long)]
        id: Vec<PathBuf>,
        /// Scores taken as OOD (records of the other split are skipped).
        #[arg(long)]
        ood: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.95, value_parser = parse_open_unit)]
        tpr: f64,
        #[arg(long, default_value = "CoVer")]
        method: String,
        #[arg(long, default_value = "custom")]
        dataset: String,
        /// Extra report rows (CSV `method,dataset,auroc,fpr95`, in percent)
        /// appended to the CSV report verbatim.
        #[arg(long)]
        rows: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Also write the CSV report here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Score histogram overlay as SVG.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..=1000))]
        bins: u32,
    },
    /// Rank candidate corruptions on a validation split.
    Select {
        /// Logit table providing the ID samples.
        #[arg(long)]
        id: PathBuf,
        /// Logit table providing the OOD samples; defaults to `--id`.
        #[arg(long)]
        ood: Option<PathBuf>,
        /// Comma list of `kind:severity`; defaults to the 90-entry catalogue.
        #[arg(long)]
        candidates: Option<String>,
        #[arg(long, short, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Analytic and Monte-Carlo FPR of the two-Gaussian model before and
    /// after a parameter delta.
    Simulate {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        mu_id: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_id: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu_ood: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_ood: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        d_mu_id: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        d_sigma_id: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        d_mu_ood: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        d_sigma_ood: f64,
        #[arg(long, default_value_t = 0.95, value_parser = parse_open_unit)]
        tpr: f64,
        /// Monte-Carlo draws per distribution.
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, env = "COVER_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Split an image into low- and high-frequency parts.
    Freq {
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Filter radius as a fraction of the basis length.
        #[arg(long, default_value_t = 0.6, value_parser = parse_radius)]
        radius: f64,
        #[arg(long, value_enum, default_value_t = Basis::HalfMinSide)]
        basis: Basis,
    },
    /// Original-only, corrupted-only and averaged detection on the
    /// synthetic confidence benchmark.
    BenchSynth {
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
        n_id: u64,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
        n_ood: u64,
        #[arg(long, default_value_t = 0.3)]
        gap: f64,
        #[arg(long, default_value_t = 0.95, value_parser = parse_open_unit)]
        tpr: f64,
        #[arg(long, env = "COVER_SEED", default_value_t = 0)]
        seed: u64,
        /// Three-panel score histogram as SVG.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Fit the pixel-prototype classifier and export NDJSON logits.
    Logits {
        /// Training images as `<root>/<class>/*.png`.
        #[arg(long)]
        train: PathBuf,
        /// ID images, same layout as `--train`.
        #[arg(long)]
        id: PathBuf,
        /// OOD images, flat or in subdirectories.
        #[arg(long)]
        ood: PathBuf,
        #[arg(long, default_value = "original", value_parser = parse_dims)]
        dims: DimensionSet,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(2..=512))]
        image_size: u32,
        #[arg(long, default_value_t = 100.0, value_parser = parse_positive)]
        scale: f64,
        #[arg(long, env = "COVER_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Corruption catalogue.
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args, Debug, Clone)]
pub struct ScoringArgs {
    #[arg(long, default_value = "msp", value_parser = parse_score_kind)]
    pub score: ScoreKind,
    /// Softmax temperature.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub tau: f64,
    /// Energy temperature.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub temperature: f64,
    /// Trailing negative logits per record (NegLabel and CLIPN).
    #[arg(long, default_value_t = 0)]
    pub neg_count: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    HalfMinSide,
    HalfDiagonal,
}

impl From<Basis> for RadiusBasis {
    fn from(b: Basis) -> Self {
        match b {
            Basis::HalfMinSide => RadiusBasis::HalfMinSide,
            Basis::HalfDiagonal => RadiusBasis::HalfDiagonal,
        }
    }
}

fn parse_kind(s: &str) -> Result<CorruptionKind, String> {
    s.parse().map_err(|e: cover_core::CorruptionError| e.to_string())
}

fn parse_dims(s: &str) -> Result<DimensionSet, String> {
    s.parse().map_err(|e: cover_core::CorruptionError| e.to_string())
}

fn parse_score_kind(s: &str) -> Result<ScoreKind, String> {
    s.parse().map_err(|e: cover_core::ScoringError| e.to_string())
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn parse_open_unit(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a number strictly between 0 and 1, got `{s}`")),
    }
}

fn parse_radius(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1.0 => Ok(v),
        _ => Err(format!("expected a radius fraction in (0, 1], got `{s}`")),
    }
}

fn parse(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    let color = if std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()) {
        ColorChoice::Never
    } else {
        ColorChoice::Auto
    };
    let matches = Cli::command().color(color).try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let args = match config::merge_config(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match parse(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
