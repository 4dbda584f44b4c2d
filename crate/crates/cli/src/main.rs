//! `dialect-rag`: ingest, index, query, translate and evaluate from the
//! command line. Exit codes: 0 ok, 2 usage, 3 data, 4 network.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dialect_rag::corpus::SourceFormat;
use dialect_rag::eval::HeatmapMetric;
use dialect_rag::pipeline::Strategy;
use dialect_rag::retrieve::DeepMode;

#[derive(Parser)]
#[command(name = "dialect-rag", version, about = "Retrieval-augmented Standard Bengali to dialect translation")]
struct Cli {
    /// `key = value` settings file (overridden by environment and flags).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize, tag and merge a raw dataset into a corpus file.
    Ingest(IngestArgs),
    /// Build and save the hybrid index for a corpus file.
    Index(IndexArgs),
    /// Show ranked retrieval candidates for one query.
    Query(QueryArgs),
    /// Translate one sentence or a pairs file.
    Translate(TranslateArgs),
    /// Translate a pairs file and score it against the references.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Transcript,
    Pairs,
}

impl From<FormatArg> for SourceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Transcript => SourceFormat::Transcript,
            FormatArg::Pairs => SourceFormat::Pairs,
        }
    }
}

#[derive(Args)]
pub struct IngestArgs {
    /// Raw dataset (JSON Lines, or CSV with a header row).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "pairs")]
    format: FormatArg,
    /// Normalized corpus output (JSON Lines).
    #[arg(long)]
    output: PathBuf,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Force CSV parsing regardless of extension.
    #[arg(long)]
    csv: bool,
    /// Print ingest statistics as JSON on stdout.
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
pub struct IndexArgs {
    /// Corpus file written by `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Embedding service base URL; the built-in hashed embedder is used otherwise.
    #[arg(long)]
    embed_url: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RetrievalArg {
    #[value(name = "1")]
    P1,
    #[value(name = "2")]
    P2,
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    text: String,
    #[arg(long)]
    dialect: String,
    #[arg(long, value_enum, default_value = "2")]
    pipeline: RetrievalArg,
    /// Deep search: auto, on or off.
    #[arg(long)]
    deep: Option<DeepMode>,
    #[arg(long)]
    k: Option<usize>,
    /// Include weights, candidate counts and every scored candidate.
    #[arg(long)]
    explain: bool,
    #[arg(long)]
    embed_url: Option<String>,
}

/// Options shared by `translate` and `evaluate`.
#[derive(Args)]
pub struct ModelArgs {
    /// Few-shot budget.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    deep: Option<DeepMode>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    llm_url: Option<String>,
    /// Serve model responses from a fixture file; no network.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Call the model and save every response to a fixture file.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Directory with zero.txt, p1.txt and p2.txt overriding the built-in prompts.
    #[arg(long)]
    template_dir: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    embed_url: Option<String>,
    /// Where outputs and the run manifest are written.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct TranslateArgs {
    /// Index file; not needed for zero-shot.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Sentence to translate.
    #[arg(long, conflicts_with = "pairs", required_unless_present = "pairs")]
    text: Option<String>,
    /// Pairs file (JSON Lines) whose inputs are translated.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Target dialect (required with --text).
    #[arg(long, required_unless_present = "pairs")]
    dialect: Option<String>,
    /// zero, 1 or 2.
    #[arg(long, default_value = "2")]
    pipeline: Strategy,
    /// Print the prompt instead of calling the model.
    #[arg(long)]
    dry_run: bool,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    index: Option<PathBuf>,
    /// Comma-separated list of zero, 1, 2.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pipeline: Vec<Strategy>,
    /// Also write a pipeline-by-dialect matrix of one metric.
    #[arg(long)]
    heatmap_csv: Option<PathBuf>,
    #[arg(long, default_value = "wer")]
    heatmap_metric: HeatmapMetric,
    #[command(flatten)]
    model: ModelArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let settings = match config::Settings::load(cli.config.as_deref()) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Index(a) => commands::index(a, settings),
        Command::Query(a) => commands::query(a, settings),
        Command::Translate(a) => commands::translate(a, settings),
        Command::Evaluate(a) => commands::evaluate(a, settings),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: error::CliError) -> ExitCode {
    eprintln!("dialect-rag: {e}");
    ExitCode::from(e.exit_code() as u8)
}
