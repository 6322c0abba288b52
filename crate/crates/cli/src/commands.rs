use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use ragkit_arena::{ConfigError, ServeConfig};
use ragkit_core::corpus::{
    deduplicate_path, parse_document_stream, segment_document, write_documents, write_segments, CorpusError, DedupConfig,
    SegmentConfig, SegmentStore,
};
use ragkit_core::generation::GenerationError;
use ragkit_core::pipeline::{
    build_generator, build_reranker, run_batch, BackendRegistry, Corpus, GeneratorConfig, Pipeline, PipelineConfig,
    PipelineError, RerankerConfig, RetrieverConfig, TopicFailure, TopicOutcome,
};
use ragkit_core::ragio::{read_batch, validate, write_batch, IoContractError};
use ragkit_core::rerank::{
    progressive_rerank, truncate_top_k, Candidate, IdentityBackend, RankedList, RerankError, WindowPlan,
};
use ragkit_core::retrieval::{
    build_index, read_trec_run, search, write_trec_run, Bm25Params, InvertedIndex, RetrievalError, ScoredSegment,
    TrecRun,
};
use ragkit_core::topics::{
    diversity_sample, load_topics, filter_by_category, report_stats_with_threshold, Topic, TopicCategory, TopicError,
    DEFAULT_KEEP,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CliError(pub String);

macro_rules! cli_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError(e.to_string())
            }
        })*
    };
}

cli_from!(
    std::io::Error,
    CorpusError,
    RetrievalError,
    TopicError,
    PipelineError,
    IoContractError,
    ConfigError,
    RerankError,
    GenerationError,
    serde_json::Error,
    toml::de::Error
);

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit status.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;

pub fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Corpus(CorpusCommand::Ingest(a)) => ingest(&a),
        Command::Corpus(CorpusCommand::Dedup(a)) => dedup(&a),
        Command::Corpus(CorpusCommand::Segment(a)) => segment(&a),
        Command::Index(IndexCommand::Build(a)) => index_build(&a),
        Command::Index(IndexCommand::Stats(a)) => index_stats(&a),
        Command::Search(a) => search_cmd(&a),
        Command::Rerank(a) => rerank_cmd(&a),
        Command::Generate(a) => generate_cmd(&a),
        Command::Run(a) => run_cmd(&a),
        Command::Replay(a) => replay_cmd(&a),
        Command::Validate(a) => validate_cmd(&a),
        Command::Topics(TopicsCommand::Sample(a)) => topics_sample(&a),
        Command::Topics(TopicsCommand::Stats(a)) => topics_stats(&a),
        Command::Topics(TopicsCommand::Filter(a)) => topics_filter(&a),
        Command::Serve(a) => serve_cmd(&a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn finish(mut m: RunManifest, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    for p in inputs {
        m.input(p)?;
    }
    for p in outputs {
        m.output(p)?;
    }
    let path = m.finish(outputs[0])?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn load_registry(path: Option<&Path>) -> Result<BackendRegistry> {
    #[derive(Deserialize)]
    struct File {
        #[serde(default)]
        backends: BackendRegistry,
    }
    match path {
        None => Ok(BackendRegistry::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError(format!("{}: {e}", p.display())))?;
            Ok(toml::from_str::<File>(&text)?.backends)
        }
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn ingest(a: &IngestArgs) -> Result<u8> {
    let m = RunManifest::start("ingest", "corpus ingest", json!({}));
    let mut out = create(&a.output)?;
    let mut n = 0usize;
    for doc in parse_document_stream(open(&a.input)?) {
        write_documents(&mut out, [&doc?])?;
        n += 1;
    }
    out.flush()?;
    drop(out);
    eprintln!("ingested {n} documents");
    finish(m, &[&a.input], &[&a.output])?;
    Ok(EXIT_OK)
}

fn dedup(a: &DedupArgs) -> Result<u8> {
    let cfg = DedupConfig {
        shingle_width: a.shingle,
        num_perms: a.perms,
        bands: a.bands,
        rows: a.rows,
        jaccard_threshold: a.threshold,
        seed: a.seed,
    };
    let m = RunManifest::start(
        "dedup",
        "corpus dedup",
        json!({
            "shingle_width": a.shingle, "num_perms": a.perms, "bands": a.bands,
            "rows": a.rows, "jaccard_threshold": a.threshold, "seed": a.seed,
        }),
    );
    let outcome = deduplicate_path(&a.input, &cfg)?;
    let kept: HashSet<&str> = outcome.kept.iter().map(String::as_str).collect();
    let mut out = create(&a.output)?;
    for doc in parse_document_stream(open(&a.input)?) {
        let doc = doc?;
        if kept.contains(doc.doc_id.as_str()) {
            write_documents(&mut out, [&doc])?;
        }
    }
    out.flush()?;
    drop(out);

    let classes_path = a.classes.clone().unwrap_or_else(|| sibling(&a.output, ".classes.jsonl"));
    let mut w = create(&classes_path)?;
    for c in &outcome.classes {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    drop(w);
    let report_path = a.report.clone().unwrap_or_else(|| sibling(&a.output, ".report.json"));
    std::fs::write(&report_path, serde_json::to_string_pretty(&outcome.report)? + "\n")?;
    println!("{}", serde_json::to_string(&outcome.report)?);
    finish(m, &[&a.input], &[&a.output, &classes_path, &report_path])?;
    Ok(EXIT_OK)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn segment(a: &SegmentArgs) -> Result<u8> {
    let cfg = SegmentConfig {
        window: a.window,
        stride: a.stride,
    };
    cfg.validate()?;
    let m = RunManifest::start("segment", "corpus segment", json!({ "window": a.window, "stride": a.stride }));
    let mut out = create(&a.output)?;
    let (mut docs, mut segs) = (0usize, 0usize);
    for doc in parse_document_stream(open(&a.input)?) {
        let s = segment_document(&doc?, cfg)?;
        write_segments(&mut out, &s)?;
        docs += 1;
        segs += s.len();
    }
    out.flush()?;
    drop(out);
    eprintln!("{docs} documents -> {segs} segments");
    finish(m, &[&a.input], &[&a.output])?;
    Ok(EXIT_OK)
}

fn index_build(a: &IndexBuildArgs) -> Result<u8> {
    let m = RunManifest::start("index", "index build", json!({}));
    let store = SegmentStore::open(&a.segments)?;
    let index = build_index(store.sorted())?;
    index.save(&a.output)?;
    println!("{}", serde_json::to_string(&index.stats())?);
    finish(m, &[&a.segments], &[&a.output])?;
    Ok(EXIT_OK)
}

fn index_stats(a: &IndexStatsArgs) -> Result<u8> {
    let index = InvertedIndex::load(&a.index)?;
    println!("{}", serde_json::to_string_pretty(&index.stats())?);
    Ok(EXIT_OK)
}

fn bm25(a: &Bm25Args) -> Result<Bm25Params> {
    let p = Bm25Params { k1: a.k1, b: a.b };
    p.validate()?;
    Ok(p)
}

fn search_cmd(a: &SearchArgs) -> Result<u8> {
    let params = bm25(&a.bm25)?;
    let m = RunManifest::start(
        &a.run_tag,
        "search",
        json!({ "k": a.k, "run_tag": a.run_tag, "bm25": params }),
    );
    let index = InvertedIndex::load(&a.index)?;
    let topics = load_topics(&a.topics, None)?;
    let hits: Vec<Vec<ScoredSegment>> = topics.par_iter().map(|t| search(&index, &t.text, a.k, params)).collect();
    let mut run = TrecRun::new(&a.run_tag);
    for (t, h) in topics.iter().zip(hits) {
        if h.is_empty() {
            log::warn!("topic {} retrieved nothing", t.topic_id);
        }
        run.topics.insert(t.topic_id.clone(), h);
    }
    let mut out = create(&a.output)?;
    write_trec_run(&mut out, &run)?;
    out.flush()?;
    drop(out);
    finish(m, &[&a.index, &a.topics], &[&a.output])?;
    Ok(EXIT_OK)
}

fn plan(w: &WindowArgs) -> Result<WindowPlan> {
    let p = WindowPlan {
        window: w.window,
        stride: w.stride,
        passes: w.passes,
    };
    p.validate()?;
    if !(1..=ragkit_core::ragio::MAX_REFERENCES).contains(&w.top_k) {
        return Err(CliError(format!("--top-k {} outside 1..=20", w.top_k)));
    }
    Ok(p)
}

fn candidates(store: &SegmentStore, hits: &[ScoredSegment]) -> Result<Vec<Candidate>> {
    hits.iter()
        .map(|h| {
            let seg = store
                .get(&h.segment_id)
                .ok_or_else(|| CliError(format!("segment {} not in the segment store", h.segment_id)))?;
            Ok(Candidate {
                segment_id: h.segment_id.clone(),
                title: seg.title.clone(),
                text: seg.text.clone(),
                score: h.score,
            })
        })
        .collect()
}

fn rerank_cmd(a: &RerankArgs) -> Result<u8> {
    let plan = plan(&a.window)?;
    let registry = load_registry(a.backends.as_deref())?;
    let backend = build_reranker(&a.backend, &registry)?;
    let m = RunManifest::start(
        &a.run_tag,
        "rerank",
        json!({ "backend": a.backend, "plan": plan, "top_k": a.window.top_k, "run_tag": a.run_tag }),
    );
    let input = read_trec_run(open(&a.run)?)?;
    let store = SegmentStore::open(&a.segments)?;
    let topics = load_topics(&a.topics, None)?;
    let text = |id: &str| topics.iter().find(|t| t.topic_id == id).map(|t| t.text.clone());
    let mut out_run = TrecRun::new(&a.run_tag);
    for (qid, hits) in &input.topics {
        let query = text(qid).ok_or_else(|| CliError(format!("topic {qid} is in the run but not the topics file")))?;
        let list = RankedList {
            topic_id: qid.clone(),
            query,
            items: candidates(&store, hits)?,
        };
        let reranked = truncate_top_k(&progressive_rerank(&list, backend.as_ref(), &plan)?, a.window.top_k);
        // scores are 1/rank after a pass
        out_run.topics.insert(qid.clone(), reranked.to_scored());
    }
    let mut out = create(&a.output)?;
    write_trec_run(&mut out, &out_run)?;
    out.flush()?;
    drop(out);
    finish(m, &[&a.run, &a.segments, &a.topics], &[&a.output])?;
    Ok(EXIT_OK)
}

/// Machine-readable outcome of a batch, printed on stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub run_id: String,
    pub topics: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub zero_hit_topics: Vec<String>,
    pub dropped_citations: usize,
    pub failures: Vec<TopicFailure>,
}

impl BatchSummary {
    fn new(run_id: &str, topics: usize, records: &[TopicOutcome], failures: Vec<TopicFailure>) -> Self {
        Self {
            run_id: run_id.to_string(),
            topics,
            succeeded: records.len(),
            failed: failures.len(),
            zero_hit_topics: records.iter().filter(|r| r.zero_hits).map(|r| r.response.topic_id.clone()).collect(),
            dropped_citations: records.iter().map(|r| r.dropped_citations).sum(),
            failures,
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.failed == 0 {
            EXIT_OK
        } else if self.succeeded == 0 {
            EXIT_FAILED
        } else {
            EXIT_PARTIAL
        }
    }
}

fn write_records(path: &Path, records: &[TopicOutcome]) -> Result<()> {
    let mut out = create(path)?;
    write_batch(&mut out, records.iter().map(|r| &r.response))?;
    out.flush()?;
    Ok(())
}

fn generate_cmd(a: &GenerateArgs) -> Result<u8> {
    let registry = load_registry(a.backends.as_deref())?;
    let config = PipelineConfig {
        id: a.run_id.clone(),
        retriever: RetrieverConfig::default(),
        reranker: RerankerConfig {
            top_k: a.top_k,
            ..Default::default()
        },
        generator: GeneratorConfig {
            backend: a.backend.clone(),
            ..Default::default()
        },
    };
    let pipeline = Pipeline::from_parts(config.clone(), Arc::new(IdentityBackend), build_generator(&a.backend, &registry)?)?;
    let m = RunManifest::start(
        &a.run_id,
        "generate",
        json!({ "generator": config.generator, "top_k": a.top_k, "jobs": a.jobs, "backends": registry }),
    );
    let run = read_trec_run(open(&a.run)?)?;
    let store = SegmentStore::open(&a.segments)?;
    let topics = load_topics(&a.topics, None)?;
    let results: Vec<Result<TopicOutcome>> = with_pool(a.jobs, || {
        topics
            .par_iter()
            .map(|t| {
                let hits = run.topics.get(&t.topic_id).map(Vec::as_slice).unwrap_or(&[]);
                let top = &hits[..hits.len().min(a.top_k)];
                let segs = candidates(&store, top)?;
                Ok(pipeline.answer_from(&a.run_id, &t.topic_id, &t.text, &segs)?)
            })
            .collect()
    });
    let (records, failures) = split_results(&topics, results);
    let summary = BatchSummary::new(&a.run_id, topics.len(), &records, failures);
    write_records(&a.output, &records)?;
    println!("{}", serde_json::to_string(&summary)?);
    finish(m, &[&a.run, &a.segments, &a.topics], &[&a.output])?;
    Ok(summary.exit_code())
}

fn split_results(topics: &[Topic], results: Vec<Result<TopicOutcome>>) -> (Vec<TopicOutcome>, Vec<TopicFailure>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (t, r) in topics.iter().zip(results) {
        match r {
            Ok(o) => records.push(o),
            Err(e) => {
                log::warn!("topic {}: {e}", t.topic_id);
                failures.push(TopicFailure {
                    topic_id: t.topic_id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    (records, failures)
}

/// Everything `run` needs, as recorded in its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub topics: PathBuf,
    pub index: PathBuf,
    pub segments: PathBuf,
    pub run_id: String,
    pub jobs: usize,
    pub pipeline: PipelineConfig,
    /// Backend definitions; credentials are referenced by variable name only.
    pub backends: BackendRegistry,
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self> {
        let plan = plan(&a.window)?;
        Ok(Self {
            topics: a.topics.clone(),
            index: a.index.clone(),
            segments: a.segments.clone(),
            run_id: a.run_id.clone(),
            jobs: a.jobs,
            pipeline: PipelineConfig {
                id: a.run_id.clone(),
                retriever: RetrieverConfig {
                    k: a.k,
                    bm25: bm25(&a.bm25)?,
                },
                reranker: RerankerConfig {
                    backend: a.reranker.clone(),
                    plan,
                    top_k: a.window.top_k,
                },
                generator: GeneratorConfig {
                    backend: a.generator.clone(),
                    ..Default::default()
                },
            },
            backends: load_registry(a.backends.as_deref())?,
        })
    }
}

/// Runs a batch and writes the JSONL plus its manifest. Returns the summary.
pub fn run_with_config(cfg: &RunConfig, output: &Path) -> Result<BatchSummary> {
    let pipeline = Pipeline::build(cfg.pipeline.clone(), &cfg.backends)?;
    let m = RunManifest::start(&cfg.run_id, "run", serde_json::to_value(cfg)?);
    let corpus = Corpus::open(&cfg.index, &cfg.segments)?;
    let topics = load_topics(&cfg.topics, None)?;
    let batch = run_batch(&pipeline, &corpus, &topics, &cfg.run_id, cfg.jobs);
    let summary = BatchSummary::new(&cfg.run_id, topics.len(), &batch.records, batch.failures);
    write_records(output, &batch.records)?;
    finish(m, &[&cfg.topics, &cfg.index, &cfg.segments], &[output])?;
    Ok(summary)
}

fn run_cmd(a: &RunArgs) -> Result<u8> {
    let cfg = RunConfig::from_args(a)?;
    let summary = run_with_config(&cfg, &a.output)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(summary.exit_code())
}

fn replay_cmd(a: &ReplayArgs) -> Result<u8> {
    let m = RunManifest::load(&a.manifest)?;
    if m.command != "run" {
        return Err(CliError(format!("only run manifests can be replayed, got {:?}", m.command)));
    }
    let changed = m.changed_inputs();
    if !changed.is_empty() && !a.force {
        return Err(CliError(format!("inputs changed since the run: {}", changed.join(", "))));
    }
    let cfg: RunConfig = serde_json::from_value(m.config)?;
    let summary = run_with_config(&cfg, &a.output)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(summary.exit_code())
}

fn validate_cmd(a: &ValidateArgs) -> Result<u8> {
    let mut bad = 0usize;
    let mut n = 0usize;
    for (i, line) in open(&a.input)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        n += 1;
        match ragkit_core::ragio::deserialize(&line) {
            Ok(resp) => {
                let v = validate(&resp);
                if !v.is_empty() {
                    bad += 1;
                    for x in v {
                        println!("line {}: {x}", i + 1);
                    }
                }
            }
            Err(e) => {
                bad += 1;
                println!("line {}: {e}", i + 1);
            }
        }
    }
    // whole-file checks such as duplicate topics
    if bad == 0 {
        read_batch(open(&a.input)?)?;
    }
    println!("{n} records, {bad} invalid");
    Ok(if bad == 0 { EXIT_OK } else { EXIT_FAILED })
}

fn load_source(s: &TopicSource) -> Result<Vec<Topic>> {
    Ok(load_topics(&s.topics, s.sidecar.as_deref())?)
}

/// Writes `topic_id<TAB>text` lines, plus a sidecar JSONL beside it when
/// any topic carries a category or attributes.
fn write_topics(path: &Path, topics: &[Topic]) -> Result<Vec<PathBuf>> {
    let mut out = create(path)?;
    for t in topics {
        writeln!(out, "{}\t{}", t.topic_id, t.text)?;
    }
    out.flush()?;
    let mut written = vec![path.to_path_buf()];
    if topics.iter().any(|t| t.category.is_some() || t.attributes.is_some()) {
        let side = sibling(path, ".sidecar.jsonl");
        let mut w = create(&side)?;
        for t in topics {
            let mut v = serde_json::to_value(t)?;
            if let Some(o) = v.as_object_mut() {
                o.remove("text");
            }
            serde_json::to_writer(&mut w, &v)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        written.push(side);
    }
    Ok(written)
}

fn source_inputs(s: &TopicSource) -> Vec<&Path> {
    let mut v = vec![s.topics.as_path()];
    v.extend(s.sidecar.as_deref());
    v
}

fn topics_sample(a: &TopicsSampleArgs) -> Result<u8> {
    let m = RunManifest::start("topics", "topics sample", json!({ "k": a.k }));
    let pool = load_source(&a.source)?;
    let sample = diversity_sample(&pool, a.k)?;
    let written = write_topics(&a.output, &sample)?;
    let outs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    finish(m, &source_inputs(&a.source), &outs)?;
    Ok(EXIT_OK)
}

fn topics_stats(a: &TopicsStatsArgs) -> Result<u8> {
    let topics = load_source(&a.source)?;
    println!("{}", serde_json::to_string_pretty(&report_stats_with_threshold(&topics, a.threshold))?);
    Ok(EXIT_OK)
}

fn topics_filter(a: &TopicsFilterArgs) -> Result<u8> {
    let keep: BTreeSet<TopicCategory> = if a.keep.is_empty() {
        DEFAULT_KEEP.into_iter().collect()
    } else {
        a.keep.iter().map(|k| k.trim().parse()).collect::<std::result::Result<_, _>>()?
    };
    let names: Vec<&str> = keep.iter().map(|c| c.name()).collect();
    let m = RunManifest::start("topics", "topics filter", json!({ "keep": names }));
    let topics = load_source(&a.source)?;
    let kept = filter_by_category(&topics, &keep)?;
    eprintln!("kept {} of {} topics", kept.len(), topics.len());
    let written = write_topics(&a.output, &kept)?;
    let outs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    finish(m, &source_inputs(&a.source), &outs)?;
    Ok(EXIT_OK)
}

fn serve_cmd(a: &ServeArgs) -> Result<u8> {
    let cfg = ServeConfig::load(&a.config)?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError(format!("bad address: {e}")))?;
    // built and dropped outside the runtime: backend clients block
    let arena = Arc::new(cfg.build_arena()?);
    let rt = tokio::runtime::Runtime::new()?;
    let served = rt.block_on(ragkit_arena::serve(arena.clone(), addr));
    drop(rt);
    drop(arena);
    served?;
    Ok(EXIT_OK)
}
