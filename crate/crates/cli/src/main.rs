mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use newsstake::Error;

#[derive(Debug, Parser)]
#[command(name = "newsstake", version, about = "Classify stakeholders of news entities by entailment")]
pub struct Cli {
    /// JSON file overriding pipeline defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for per-document and per-entity work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Keep documents matching topic keywords.
    Ingest(IngestArgs),
    /// Build entity descriptions from a corpus.
    Describe(DescribeArgs),
    /// Split a labeled file into train/dev/test sets with unseen labels held out.
    Split(SplitArgs),
    /// Turn labeled examples into premise/hypothesis pairs.
    Compile(CompileArgs),
    /// Predict stakeholder labels for entity descriptions.
    Classify(ClassifyArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Compare prompt templates on the same gold set.
    Robustness(RobustnessArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// File with one keyword per line.
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    /// Keyword to match; repeatable.
    #[arg(long = "keyword")]
    pub keyword: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub min_hits: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecognizerKind {
    Builtin,
    Sidecar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Lexical,
    Sidecar,
}

#[derive(Debug, Args)]
pub struct SidecarArgs {
    /// Base URL of the model sidecar.
    #[arg(long, env = "NEWSSTAKE_ENDPOINT", default_value = "http://127.0.0.1:8765")]
    pub endpoint: String,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
    /// Largest number of pairs per request.
    #[arg(long, default_value_t = 32)]
    pub max_batch: usize,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = RecognizerKind::Builtin)]
    pub recognizer: RecognizerKind,
    /// Gazetteer for the builtin recognizer.
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    /// Manual phrase-to-page links.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[arg(long, env = "NEWSSTAKE_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Never touch the network; cache misses give no background.
    #[arg(long)]
    pub offline: bool,
    #[arg(long, default_value = newsstake::knowledge::DEFAULT_BASE_URL)]
    pub encyclopedia_url: String,
    #[arg(long)]
    pub min_mentions: Option<usize>,
    #[command(flatten)]
    pub sidecar: SidecarArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Label held out of training; repeatable.
    #[arg(long = "unseen")]
    pub unseen: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    pub dev_fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TemplateArgs {
    /// Label registry file; the built-in registry when absent.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Template registry file; the shipped templates when absent.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Template id; the configured template when absent.
    #[arg(long)]
    pub template: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub labeled: PathBuf,
    #[command(flatten)]
    pub templates: TemplateArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScorerArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Lexical)]
    pub backend: BackendKind,
    #[command(flatten)]
    pub sidecar: SidecarArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub descriptions: PathBuf,
    #[command(flatten)]
    pub templates: TemplateArgs,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// Multi-label mode: minimum score for a label.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Multi-label mode: most labels per entity.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub golds: PathBuf,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write one CSV row per (split, template, label).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[arg(long)]
    pub descriptions: PathBuf,
    #[arg(long)]
    pub golds: PathBuf,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Template registry file; the shipped templates when absent.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

const EXIT_INPUT: u8 = 2;
const EXIT_PROVIDER: u8 = 3;
const EXIT_TRANSPORT: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Provider { .. }) => EXIT_PROVIDER,
        Some(Error::Backend { .. } | Error::Protocol { .. } | Error::Knowledge { .. }) => EXIT_TRANSPORT,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
