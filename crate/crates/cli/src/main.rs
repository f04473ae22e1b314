use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crossnli::eval::ParsingMode;

mod commands;
mod config;

use commands::Failure;
use config::Config;

#[derive(Parser)]
#[command(name = "crossnli", version)]
#[command(
    about = "Logic-verified cross-lingual NLI: generate suites, evaluate chat models, report accuracy"
)]
struct Cli {
    /// JSON configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (suite/, runs/, reports/, quality/, cache/)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Sampling seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the balanced suite: one JSONL file per ordered language pair
    Gen(GenArgs),
    /// Query a chat model on every example of the suite
    Eval(EvalArgs),
    /// Build accuracy matrices from finished runs
    Report(ReportArgs),
    /// Mean embedding cosine between English premises and their translations
    Quality(QualityArgs),
    /// Check a lexicon and a template file
    Validate(ValidateArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// Comma-separated language codes, e.g. en,de,fr
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    /// Examples per dataset
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Restrict sampling to these template ids
    #[arg(long, value_delimiter = ',')]
    pub template_ids: Vec<String>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Suite directory (default: <out>/suite)
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Only these pairings, e.g. en-de,fr-fr
    #[arg(long, value_delimiter = ',')]
    pub pairs: Vec<String>,
    /// Name for a new run
    #[arg(long, conflicts_with = "resume")]
    pub run_id: Option<String>,
    /// Continue an interrupted run
    #[arg(long, value_name = "RUN_ID")]
    pub resume: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<ParsingMode>,
    /// Concurrent requests
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Chat endpoint base URL (overrides config)
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model id (overrides config)
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Directory holding predictions files (default: <out>/runs)
    #[arg(long)]
    pub runs: Option<PathBuf>,
    #[arg(long)]
    pub run_id: Option<String>,
    /// csv, json, md or all
    #[arg(long, default_value = "all")]
    pub format: String,
}

#[derive(Args)]
pub struct QualityArgs {
    /// Comma-separated target languages
    #[arg(long, value_delimiter = ',', required = true)]
    pub language: Vec<String>,
    /// Aligned pairs per language, taken in id order
    #[arg(long, default_value_t = 100)]
    pub sample: usize,
    /// Translate the English premises with the configured MT endpoint
    #[arg(long)]
    pub via_mt: bool,
    /// Fail (exit 3) when any language's mean cosine is below this value
    #[arg(long)]
    pub min_similarity: Option<f64>,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// csv, json, md or all
    #[arg(long, default_value = "all")]
    pub format: String,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<ParsingMode, String> {
    s.parse()
}

/// Settings shared by every subcommand.
pub struct Context {
    pub config: Config,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(Failure::config)?,
        None => Config::default(),
    };
    let out = cli
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("crossnli-out"));
    let ctx = Context {
        seed: cli.seed.or(config.seed),
        config,
        out,
    };
    match cli.command {
        Command::Gen(args) => commands::gen(&ctx, args),
        Command::Eval(args) => commands::eval(&ctx, args),
        Command::Report(args) => commands::report(&ctx, args),
        Command::Quality(args) => commands::quality(&ctx, args),
        Command::Validate(args) => commands::validate(&ctx, args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
