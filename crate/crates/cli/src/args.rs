use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ragkit", version, about = "Retrieval-augmented generation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Document collection stages.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Build or inspect the BM25 index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// BM25 retrieval for every topic; writes a TREC run.
    Search(SearchArgs),
    /// Listwise reranking of a TREC run.
    Rerank(RerankArgs),
    /// Cited answer generation over a reranked run.
    Generate(GenerateArgs),
    /// Retrieval, reranking and generation in one go.
    Run(RunArgs),
    /// Re-execute a `run` from its manifest.
    Replay(ReplayArgs),
    /// Check a JSONL batch file against the response schema.
    Validate(ValidateArgs),
    /// Topic set tools.
    #[command(subcommand)]
    Topics(TopicsCommand),
    /// Start the REST server and battle arena.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Parse and normalize a raw document JSONL stream.
    Ingest(IngestArgs),
    /// Remove near-duplicate documents.
    Dedup(DedupArgs),
    /// Split documents into overlapping sentence windows.
    Segment(SegmentArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Document JSONL with docid, url, title, headings, body.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Kept documents, in input order.
    #[arg(long)]
    pub output: PathBuf,
    /// Character shingle width.
    #[arg(long, default_value_t = 9)]
    pub shingle: usize,
    /// MinHash permutations; must equal bands * rows.
    #[arg(long, default_value_t = 128)]
    pub perms: usize,
    #[arg(long, default_value_t = 32)]
    pub bands: usize,
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    /// Exact Jaccard needed to merge two documents.
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Equivalence classes as JSONL. Defaults to `<output>.classes.jsonl`.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Summary report. Defaults to `<output>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Sentences per segment.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Sentences between segment starts.
    #[arg(long, default_value_t = 5)]
    pub stride: usize,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Index a segment JSONL file.
    Build(IndexBuildArgs),
    /// Print index statistics as JSON.
    Stats(IndexStatsArgs),
}

#[derive(Debug, Args)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub segments: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexStatsArgs {
    #[arg(long)]
    pub index: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct Bm25Args {
    #[arg(long, default_value_t = 0.9)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.4)]
    pub b: f64,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Topics TSV: topic_id<TAB>text.
    #[arg(long)]
    pub topics: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value = "bm25")]
    pub run_tag: String,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub bm25: Bm25Args,
}

#[derive(Debug, Clone, Args)]
pub struct WindowArgs {
    #[arg(long, default_value_t = 20)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    #[arg(long, default_value_t = 3)]
    pub passes: usize,
    /// Candidates kept after reranking (at most 20).
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    /// Input TREC run.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    /// identity, mock, mock:<gold.tsv>, http:<url>, or a backend name from --backends.
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long, default_value = "rerank")]
    pub run_tag: String,
    /// TOML file with [backends.<name>] tables.
    #[arg(long)]
    pub backends: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Reranked TREC run; the first --top-k segments per topic are used.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    /// mock, mock-span, or a backend name from --backends.
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    #[arg(long, default_value = "ragkit")]
    pub run_id: String,
    #[arg(long)]
    pub backends: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    /// JSONL batch of responses.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub topics: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "ragkit")]
    pub run_id: String,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    /// Retrieval depth.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[command(flatten)]
    pub bm25: Bm25Args,
    /// Reranker spec, as for `rerank --backend`.
    #[arg(long, default_value = "mock")]
    pub reranker: String,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Generator spec, as for `generate --backend`.
    #[arg(long, default_value = "mock")]
    pub generator: String,
    #[arg(long)]
    pub backends: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the replayed batch.
    #[arg(long)]
    pub output: PathBuf,
    /// Replay even if input digests changed.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TopicSource {
    #[arg(long)]
    pub topics: PathBuf,
    /// JSONL with topic_id, category and attributes.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TopicsCommand {
    /// Diversity sample by greedy max-min distance over attributes.
    Sample(TopicsSampleArgs),
    /// Category, first-word and attribute shares as JSON.
    Stats(TopicsStatsArgs),
    /// Keep topics whose category is in the keep set.
    Filter(TopicsFilterArgs),
}

#[derive(Debug, Args)]
pub struct TopicsSampleArgs {
    #[command(flatten)]
    pub source: TopicSource,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Topics TSV of the sample.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TopicsStatsArgs {
    #[command(flatten)]
    pub source: TopicSource,
    /// Attribute score needed to count a label.
    #[arg(long, default_value_t = 5.0)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct TopicsFilterArgs {
    #[command(flatten)]
    pub source: TopicSource,
    /// Comma-separated categories. Defaults to the five answerable ones.
    #[arg(long, value_delimiter = ',')]
    pub keep: Vec<String>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Server TOML: corpus paths, backends, pipelines, arena settings.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}
