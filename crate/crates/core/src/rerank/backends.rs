use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Candidate, RawPermutation, RerankerBackend};
use crate::backend::{fill_template, post_json, BackendError, ChatClient, ChatSettings, ConcurrencyLimit, RetryPolicy};

pub const LISTWISE_TEMPLATE_ID: &str = "listwise_rerank_v1";
pub const LISTWISE_TEMPLATE: &str = include_str!("../../templates/listwise_rerank_v1.txt");

const SYSTEM: &str =
    "You are an intelligent assistant that can rank passages based on their relevancy to the query.";

/// Leaves every window as is.
#[derive(Debug, Default, Clone)]
pub struct IdentityBackend;

impl RerankerBackend for IdentityBackend {
    fn name(&self) -> &str {
        "identity"
    }

    fn max_window(&self) -> usize {
        usize::MAX
    }

    fn permute(&self, _topic: &str, window: &[Candidate]) -> Result<RawPermutation, BackendError> {
        Ok(RawPermutation::Positions((0..window.len() as i64).collect()))
    }
}

/// Deterministic offline backend that orders a window by a hidden
/// per-segment score. Segments without a hidden score fall back to the
/// score they carry; ties keep their window order.
#[derive(Debug, Clone, Default)]
pub struct MockOracleBackend {
    gold: HashMap<String, f64>,
}

impl MockOracleBackend {
    pub fn new(gold: HashMap<String, f64>) -> Self {
        Self { gold }
    }

    /// Parses `segment_id<TAB>score` lines.
    pub fn from_tsv(text: &str) -> Result<Self, String> {
        let mut gold = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, score) = line
                .split_once('\t')
                .ok_or_else(|| format!("line {}: expected id<TAB>score", i + 1))?;
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| format!("line {}: bad score {score:?}", i + 1))?;
            gold.insert(id.to_string(), score);
        }
        Ok(Self { gold })
    }

    fn score(&self, c: &Candidate) -> f64 {
        self.gold.get(&c.segment_id).copied().unwrap_or(c.score)
    }
}

impl RerankerBackend for MockOracleBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn max_window(&self) -> usize {
        usize::MAX
    }

    fn permute(&self, _topic: &str, window: &[Candidate]) -> Result<RawPermutation, BackendError> {
        let mut order: Vec<usize> = (0..window.len()).collect();
        order.sort_by(|&a, &b| self.score(&window[b]).total_cmp(&self.score(&window[a])));
        Ok(RawPermutation::Positions(order.into_iter().map(|i| i as i64).collect()))
    }
}

#[derive(Serialize)]
struct WireCandidate<'a> {
    id: &'a str,
    title: &'a str,
    text: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    topic: &'a str,
    candidates: Vec<WireCandidate<'a>>,
}

#[derive(Deserialize)]
struct WireReply {
    permutation: Vec<i64>,
}

/// Self-hosted reranker speaking
/// `POST {topic, candidates:[{id,title,text}]} -> {permutation:[ints]}`
/// with 0-based positions.
pub struct HttpRerankBackend {
    url: String,
    name: String,
    max_window: usize,
    retry: RetryPolicy,
    http: reqwest::blocking::Client,
    limit: ConcurrencyLimit,
}

impl HttpRerankBackend {
    pub fn new(url: impl Into<String>, max_window: usize, concurrency: usize, retry: RetryPolicy) -> Self {
        let url = url.into();
        Self {
            name: format!("http:{url}"),
            url,
            max_window,
            retry,
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(300))
                .build()
                .expect("http client"),
            limit: ConcurrencyLimit::new(concurrency),
        }
    }
}

impl RerankerBackend for HttpRerankBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn max_window(&self) -> usize {
        self.max_window
    }

    fn permute(&self, topic: &str, window: &[Candidate]) -> Result<RawPermutation, BackendError> {
        let body = WireRequest {
            topic,
            candidates: window
                .iter()
                .map(|c| WireCandidate {
                    id: &c.segment_id,
                    title: &c.title,
                    text: &c.text,
                })
                .collect(),
        };
        let _permit = self.limit.acquire();
        let reply: WireReply = post_json(&self.http, &self.url, &body, self.retry)?;
        Ok(RawPermutation::Positions(reply.permutation))
    }
}

/// Numbered-candidate listwise prompt for chat models.
pub fn render_listwise_prompt(topic: &str, window: &[Candidate]) -> String {
    let passages = window
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.title.is_empty() {
                format!("[{}] {}", i + 1, c.text)
            } else {
                format!("[{}] {}: {}", i + 1, c.title, c.text)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fill_template(
        LISTWISE_TEMPLATE,
        &[("num", &window.len().to_string()), ("passages", &passages), ("query", topic)],
    )
}

/// Listwise reranking through a chat-completion model; its text output is
/// parsed and repaired.
pub struct ChatRerankBackend {
    client: ChatClient,
    name: String,
    max_window: usize,
}

impl ChatRerankBackend {
    pub fn new(settings: ChatSettings, max_window: usize) -> Result<Self, BackendError> {
        let name = format!("chat:{}", settings.model);
        Ok(Self {
            client: ChatClient::new(settings)?,
            name,
            max_window,
        })
    }
}

impl RerankerBackend for ChatRerankBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn max_window(&self) -> usize {
        self.max_window
    }

    fn permute(&self, topic: &str, window: &[Candidate]) -> Result<RawPermutation, BackendError> {
        let text = self.client.complete(SYSTEM, &render_listwise_prompt(topic, window))?;
        Ok(RawPermutation::Text(text))
    }
}
