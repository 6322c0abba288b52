//! End-to-end pipelines: BM25 retrieval, listwise reranking and cited
//! answer generation, configured by name and run per topic or in batch.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{ChatSettings, RetryPolicy};
use crate::corpus::SegmentStore;
use crate::generation::{
    generate, ChatGenerator, GenerationError, GeneratorBackend, MockExtractive, MockSpan, SpanApiGenerator,
    CHATQA_TEMPLATE_ID,
};
use crate::ragio::{validate, RagResponse};
use crate::rerank::{
    progressive_rerank, truncate_top_k, Candidate, ChatRerankBackend, HttpRerankBackend, IdentityBackend,
    MockOracleBackend, RankedList, RerankError, RerankerBackend, WindowPlan,
};
use crate::retrieval::{search, Bm25Params, InvertedIndex, ScoredSegment};
use crate::topics::Topic;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("segment {0} is indexed but missing from the segment store")]
    MissingSegment(String),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error("invalid response: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrieverConfig {
    pub k: usize,
    pub bm25: Bm25Params,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        Self {
            k: 100,
            bm25: Bm25Params::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankerConfig {
    /// `identity`, `mock`, `mock:<gold.tsv>`, `http:<url>` or the name of a
    /// chat backend.
    pub backend: String,
    pub plan: WindowPlan,
    pub top_k: usize,
}

impl Default for RerankerConfig {
    fn default() -> Self {
        Self {
            backend: "identity".into(),
            plan: WindowPlan::default(),
            top_k: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// `mock`, `mock-span` or the name of a chat or span backend.
    pub backend: String,
    pub template: String,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            backend: "mock".into(),
            template: CHATQA_TEMPLATE_ID.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub id: String,
    #[serde(default)]
    pub retriever: RetrieverConfig,
    #[serde(default)]
    pub reranker: RerankerConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
}

impl PipelineConfig {
    pub fn mock(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            retriever: RetrieverConfig::default(),
            reranker: RerankerConfig {
                backend: "mock".into(),
                ..Default::default()
            },
            generator: GeneratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemoteKind {
    /// OpenAI-compatible chat completions; in-line citations.
    Chat,
    /// Grounded chat returning cited spans.
    Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteBackend {
    pub kind: RemoteKind,
    #[serde(flatten)]
    pub settings: ChatSettings,
    /// Largest rerank window this model accepts.
    #[serde(default = "default_max_window")]
    pub max_window: usize,
}

fn default_max_window() -> usize {
    20
}

/// Named remote backends a pipeline can refer to.
pub type BackendRegistry = BTreeMap<String, RemoteBackend>;

pub fn build_reranker(spec: &str, registry: &BackendRegistry) -> Result<Arc<dyn RerankerBackend>, PipelineError> {
    let cfg = |e: String| PipelineError::Config(format!("reranker {spec:?}: {e}"));
    Ok(match spec {
        "identity" => Arc::new(IdentityBackend),
        "mock" => Arc::new(MockOracleBackend::default()),
        _ if spec.starts_with("mock:") => {
            let text = std::fs::read_to_string(&spec[5..]).map_err(|e| cfg(e.to_string()))?;
            Arc::new(MockOracleBackend::from_tsv(&text).map_err(cfg)?)
        }
        _ if spec.starts_with("http://") || spec.starts_with("https://") => {
            Arc::new(HttpRerankBackend::new(spec, 20, 4, RetryPolicy::default()))
        }
        _ if spec.starts_with("http:") => Arc::new(HttpRerankBackend::new(&spec[5..], 20, 4, RetryPolicy::default())),
        name => {
            let remote = registry.get(name).ok_or_else(|| cfg("unknown backend".into()))?;
            if remote.kind != RemoteKind::Chat {
                return Err(cfg("only chat backends can rerank".into()));
            }
            Arc::new(ChatRerankBackend::new(remote.settings.clone(), remote.max_window).map_err(|e| cfg(e.to_string()))?)
        }
    })
}

pub fn build_generator(spec: &str, registry: &BackendRegistry) -> Result<Arc<dyn GeneratorBackend>, PipelineError> {
    let cfg = |e: String| PipelineError::Config(format!("generator {spec:?}: {e}"));
    Ok(match spec {
        "mock" => Arc::new(MockExtractive),
        "mock-span" => Arc::new(MockSpan),
        name => {
            let remote = registry.get(name).ok_or_else(|| cfg("unknown backend".into()))?;
            match remote.kind {
                RemoteKind::Chat => Arc::new(ChatGenerator::new(remote.settings.clone()).map_err(|e| cfg(e.to_string()))?),
                RemoteKind::Span => Arc::new(SpanApiGenerator::new(remote.settings.clone()).map_err(|e| cfg(e.to_string()))?),
            }
        }
    })
}

/// The searchable corpus: BM25 index plus the segment records it points to.
pub struct Corpus {
    pub index: InvertedIndex,
    pub store: SegmentStore,
}

impl Corpus {
    pub fn open(index_dir: &Path, segments: &Path) -> Result<Self, PipelineError> {
        let index = InvertedIndex::load(index_dir).map_err(|e| PipelineError::Config(e.to_string()))?;
        let store = SegmentStore::open(segments).map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Self { index, store })
    }

    /// Attaches stored title and text to scored hits, keeping their order.
    pub fn candidates(&self, hits: &[ScoredSegment]) -> Result<Vec<Candidate>, PipelineError> {
        hits.iter()
            .map(|h| {
                let seg = self
                    .store
                    .get(&h.segment_id)
                    .ok_or_else(|| PipelineError::MissingSegment(h.segment_id.clone()))?;
                Ok(Candidate {
                    segment_id: h.segment_id.clone(),
                    title: seg.title.clone(),
                    text: seg.text.clone(),
                    score: h.score,
                })
            })
            .collect()
    }
}

/// One topic's result.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicOutcome {
    pub response: RagResponse,
    pub hits: usize,
    pub dropped_citations: usize,
    /// Set when the topic retrieved nothing and the record is empty.
    pub zero_hits: bool,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    reranker: Arc<dyn RerankerBackend>,
    generator: Arc<dyn GeneratorBackend>,
}

impl Pipeline {
    pub fn build(config: PipelineConfig, registry: &BackendRegistry) -> Result<Self, PipelineError> {
        let reranker = build_reranker(&config.reranker.backend, registry)?;
        let generator = build_generator(&config.generator.backend, registry)?;
        Self::from_parts(config, reranker, generator)
    }

    pub fn from_parts(
        config: PipelineConfig,
        reranker: Arc<dyn RerankerBackend>,
        generator: Arc<dyn GeneratorBackend>,
    ) -> Result<Self, PipelineError> {
        if config.id.trim().is_empty() {
            return Err(PipelineError::Config("pipeline id is empty".into()));
        }
        if config.generator.template != CHATQA_TEMPLATE_ID {
            return Err(PipelineError::Config(format!("unknown template {:?}", config.generator.template)));
        }
        if !(1..=crate::ragio::MAX_REFERENCES).contains(&config.reranker.top_k) {
            return Err(PipelineError::Config(format!("top_k {} outside 1..=20", config.reranker.top_k)));
        }
        config.reranker.plan.validate()?;
        config.retriever.bm25.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Self {
            config,
            reranker,
            generator,
        })
    }

    pub fn reranker_name(&self) -> &str {
        self.reranker.name()
    }

    pub fn generator_name(&self) -> &str {
        self.generator.name()
    }

    pub fn retrieve(&self, corpus: &Corpus, topic: &str) -> Result<Vec<Candidate>, PipelineError> {
        let hits = search(&corpus.index, topic, self.config.retriever.k, self.config.retriever.bm25);
        corpus.candidates(&hits)
    }

    /// Progressive rerank followed by truncation to `top_k`.
    pub fn rerank(&self, topic_id: &str, topic: &str, candidates: Vec<Candidate>) -> Result<Vec<Candidate>, PipelineError> {
        if candidates.is_empty() {
            return Ok(candidates);
        }
        let list = RankedList {
            topic_id: topic_id.to_string(),
            query: topic.to_string(),
            items: candidates,
        };
        let plan = self.config.reranker.plan;
        let reranked = progressive_rerank(&list, self.reranker.as_ref(), &plan)?;
        Ok(truncate_top_k(&reranked, self.config.reranker.top_k).items)
    }

    /// Generates and validates the response over already reranked segments.
    pub fn answer_from(&self, run_id: &str, topic_id: &str, topic: &str, segments: &[Candidate]) -> Result<TopicOutcome, PipelineError> {
        if segments.is_empty() {
            return Ok(TopicOutcome {
                response: RagResponse::new(run_id, topic_id, Vec::new(), Vec::new()),
                hits: 0,
                dropped_citations: 0,
                zero_hits: true,
            });
        }
        let g = generate(topic, segments, self.generator.as_ref())?;
        let response = RagResponse::new(run_id, topic_id, g.references, g.answer);
        let violations = validate(&response);
        if !violations.is_empty() {
            return Err(PipelineError::Invalid(violations.iter().map(|v| v.to_string()).collect()));
        }
        Ok(TopicOutcome {
            response,
            hits: segments.len(),
            dropped_citations: g.dropped_citations,
            zero_hits: false,
        })
    }

    /// Retrieve, rerank and generate for one topic.
    pub fn run_topic(&self, corpus: &Corpus, run_id: &str, topic_id: &str, topic: &str) -> Result<TopicOutcome, PipelineError> {
        let candidates = self.retrieve(corpus, topic)?;
        let hits = candidates.len();
        let top = self.rerank(topic_id, topic, candidates)?;
        let mut out = self.answer_from(run_id, topic_id, topic, &top)?;
        out.hits = hits;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicFailure {
    pub topic_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// Successful topics, in input order.
    pub records: Vec<TopicOutcome>,
    pub failures: Vec<TopicFailure>,
}

/// Runs every topic, at most `jobs` at a time. Per-topic failures are
/// collected and the batch continues.
pub fn run_batch(pipeline: &Pipeline, corpus: &Corpus, topics: &[Topic], run_id: &str, jobs: usize) -> BatchOutcome {
    let work = || {
        topics
            .par_iter()
            .map(|t| pipeline.run_topic(corpus, run_id, &t.topic_id, &t.text))
            .collect::<Vec<_>>()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
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
                })
            }
        }
    }
    BatchOutcome { records, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Segment;
    use crate::retrieval::build_index;

    pub(crate) fn toy_corpus() -> Corpus {
        let segs: Vec<Segment> = [
            ("a#0", "Cats", "Cats sleep most of the day. They like warm places."),
            ("b#0", "Dogs", "Dogs bark at strangers. Dogs like walks."),
            ("c#0", "Cats and dogs", "Cats and dogs can live together. Training helps."),
        ]
        .iter()
        .map(|(id, title, text)| {
            Segment::from_json_line(&serde_json::json!({
                "docid": id, "url": "", "title": title, "headings": "", "segment": text,
                "start_char": 0, "end_char": text.chars().count()
            }).to_string())
            .unwrap()
        })
        .collect();
        let index = build_index(&segs).unwrap();
        Corpus {
            index,
            store: SegmentStore::from_segments(segs).unwrap(),
        }
    }

    #[test]
    fn mock_pipeline_end_to_end() {
        let corpus = toy_corpus();
        let p = Pipeline::build(PipelineConfig::mock("p"), &BackendRegistry::new()).unwrap();
        let out = p.run_topic(&corpus, "run", "t1", "do cats sleep").unwrap();
        assert_eq!(out.hits, 2);
        assert_eq!(out.response.references.len(), 2);
        assert!(validate(&out.response).is_empty());
        assert_eq!(out.response.answer[0].citations, vec![0]);
    }

    #[test]
    fn zero_hits_gives_empty_valid_record() {
        let corpus = toy_corpus();
        let p = Pipeline::build(PipelineConfig::mock("p"), &BackendRegistry::new()).unwrap();
        let out = p.run_topic(&corpus, "run", "t1", "zebra").unwrap();
        assert!(out.zero_hits);
        assert!(out.response.references.is_empty() && out.response.answer.is_empty());
        assert!(validate(&out.response).is_empty());
    }

    #[test]
    fn batch_keeps_topic_order() {
        let corpus = toy_corpus();
        let p = Pipeline::build(PipelineConfig::mock("p"), &BackendRegistry::new()).unwrap();
        let topics: Vec<Topic> = (0..9).map(|i| Topic::new(format!("t{i}"), ["cats", "dogs", "training"][i % 3])).collect();
        let b = run_batch(&p, &corpus, &topics, "run", 4);
        assert!(b.failures.is_empty());
        let ids: Vec<&str> = b.records.iter().map(|r| r.response.topic_id.as_str()).collect();
        assert_eq!(ids, topics.iter().map(|t| t.topic_id.as_str()).collect::<Vec<_>>());
        assert_eq!(b, run_batch(&p, &corpus, &topics, "run", 1));
    }

    #[test]
    fn unknown_backend_and_template_rejected() {
        let mut c = PipelineConfig::mock("p");
        c.generator.backend = "nope".into();
        assert!(Pipeline::build(c, &BackendRegistry::new()).is_err());
        let mut c = PipelineConfig::mock("p");
        c.generator.template = "other".into();
        assert!(Pipeline::build(c, &BackendRegistry::new()).is_err());
    }

    #[test]
    fn registry_from_toml() {
        let reg: BackendRegistry = toml_like();
        assert!(build_generator("gpt", &reg).is_ok());
        assert!(build_reranker("gpt", &reg).is_ok());
        assert!(build_reranker("span", &reg).is_err());
    }

    fn toml_like() -> BackendRegistry {
        serde_json::from_value(serde_json::json!({
            "gpt": {"kind": "chat", "url": "http://127.0.0.1:9/v1/chat/completions", "model": "m", "api_key_env": "KEY"},
            "span": {"kind": "span", "url": "http://127.0.0.1:9/chat", "model": "s"}
        }))
        .unwrap()
    }
}
