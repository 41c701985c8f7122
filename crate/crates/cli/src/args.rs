use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rmcontrast::{GeneratorKind, PromptVariant};

#[derive(Debug, Parser)]
#[command(name = "rmcontrast", version, about = "Contrastive explanations for reward models")]
pub struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, score and label perturbations, then persist a run.
    Explain(RunArgs),
    /// Explain, then rank attributes by preference flip rate.
    Sensitivity(RunArgs),
    /// Explain, then pick the comparisons that best match each model's
    /// global ranking.
    Representatives(RunArgs),
    /// Explain under two models and compare their representatives.
    CompareModels(RunArgs),
    /// Fraction of perturbed responses that out-score their originals.
    Winrate(WinrateArgs),
    /// Run every prompt variant and tabulate coverage and distance.
    Ablate(RunArgs),
    /// Ask the chat model which attributes explain the preferences.
    Discover(DiscoverArgs),
    /// Rebuild the reports of a run directory.
    Report(ReportArgs),
    /// Serve the mock reward, chat and embedding endpoints.
    MockServe(MockServeArgs),
    /// Recompute a run from cached responses and check it matches.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EndpointArgs {
    /// Reward models: `id` (served at `--base-url`) or `id=URL`.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,

    /// Base URL of every endpoint not configured otherwise.
    #[arg(long, default_value = "http://127.0.0.1:8787")]
    pub base_url: String,

    /// TOML file with `[chat]`, `[embedding]` and `[[models]]` tables.
    #[arg(long)]
    pub endpoints: Option<PathBuf>,

    #[arg(long, default_value = "gpt-4o")]
    pub chat_model: String,

    #[arg(long, default_value = "text-embedding-3-small")]
    pub embedding_model: String,

    /// Environment variable holding a bearer token for every endpoint.
    #[arg(long)]
    pub auth_env: Option<String>,

    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,

    #[arg(long, default_value_t = 3)]
    pub retries: u32,

    /// Response cache directory.
    #[arg(long, default_value = ".rmcontrast-cache")]
    pub cache: PathBuf,

    /// Keep responses in memory only.
    #[arg(long, conflicts_with = "offline")]
    pub no_cache: bool,

    /// Answer from the cache only; misses are transport errors.
    #[arg(long)]
    pub offline: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Dataset name in the registry.
    #[arg(long)]
    pub dataset: String,

    #[arg(long, default_value = "datasets.toml")]
    pub registry: PathBuf,

    /// Sampling seeds, one sample per seed.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
    pub seeds: Vec<u64>,

    /// Comparisons per seed.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,

    #[command(flatten)]
    pub endpoints: EndpointArgs,

    #[arg(long, default_value = "center", value_parser = parse_variant)]
    pub variant: PromptVariant,

    /// `attribute` (two-step rewriting) or `random`.
    #[arg(long, default_value = "attribute", value_parser = parse_generator)]
    pub generator: GeneratorKind,

    /// Rewrites per side for the random generator.
    #[arg(long, default_value_t = 15)]
    pub random_per_side: usize,

    /// Chat temperature; defaults to 0 for attribute rewriting and 1 for
    /// the random generator.
    #[arg(long)]
    pub temperature: Option<f64>,

    /// Parent directory of run directories.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,

    /// Concurrent comparisons.
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,

    /// Attribute catalog (JSON list of `{name, description}`).
    #[arg(long)]
    pub catalog: Option<PathBuf>,

    /// Directory of prompt template overrides.
    #[arg(long)]
    pub templates: Option<PathBuf>,

    /// Tag prompts with fixture markers for the mock chat endpoint.
    #[arg(long)]
    pub test_mode: bool,

    /// Print the planned request count and stop.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WinrateArgs {
    /// JSONL file of `{prompt, original, perturbed}` records.
    #[arg(long)]
    pub pairs: PathBuf,

    #[command(flatten)]
    pub endpoints: EndpointArgs,

    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,

    /// Write the result as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,

    #[command(flatten)]
    pub endpoints: EndpointArgs,

    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,

    #[arg(long)]
    pub templates: Option<PathBuf>,

    #[arg(long)]
    pub test_mode: bool,

    /// Number of attributes to print (all when omitted).
    #[arg(long)]
    pub top: Option<usize>,

    /// Write the ranking as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run directory.
    pub run: PathBuf,

    /// Response cache holding the run's embeddings.
    #[arg(long, default_value = ".rmcontrast-cache")]
    pub cache: PathBuf,

    /// Allow network calls for embeddings missing from the cache.
    #[arg(long)]
    pub online: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Run directory.
    pub run: PathBuf,

    #[arg(long, default_value = ".rmcontrast-cache")]
    pub cache: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MockServeArgs {
    #[arg(long, default_value = "127.0.0.1:8787")]
    pub addr: String,

    /// Canned chat answers (JSON).
    #[arg(long)]
    pub canned: Option<PathBuf>,

    /// Extra reward model served under `/<name>/score`: `name=spec.json`.
    #[arg(long = "reward")]
    pub rewards: Vec<String>,

    #[arg(long, default_value_t = 4)]
    pub threads: usize,

    /// Write the server URL to this file once listening.
    #[arg(long)]
    pub url_file: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<PromptVariant, String> {
    s.parse().map_err(|e: rmcontrast::error::InvalidInput| e.message)
}

fn parse_generator(s: &str) -> Result<GeneratorKind, String> {
    s.parse().map_err(|e: rmcontrast::error::InvalidInput| e.message)
}
