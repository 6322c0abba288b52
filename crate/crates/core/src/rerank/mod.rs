//! Listwise reranking with sliding windows and progressive multi-pass
//! refinement.

mod backends;
mod permutation;

pub use backends::{
    render_listwise_prompt, ChatRerankBackend, HttpRerankBackend, IdentityBackend, MockOracleBackend,
    LISTWISE_TEMPLATE, LISTWISE_TEMPLATE_ID,
};
pub use permutation::{parse_permutation, repair_permutation};

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::retrieval::ScoredSegment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub segment_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub text: String,
    /// First-stage score on input; `1/rank` after a rerank pass.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub topic_id: String,
    /// Topic text shown to the backend.
    pub query: String,
    pub items: Vec<Candidate>,
}

impl RankedList {
    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|c| c.segment_id.as_str()).collect()
    }

    /// Scored entries with ranks 1..n in list order.
    pub fn to_scored(&self) -> Vec<ScoredSegment> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, c)| ScoredSegment {
                segment_id: c.segment_id.clone(),
                score: c.score,
                rank: i + 1,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window: usize,
    pub stride: usize,
    pub passes: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        Self {
            window: 20,
            stride: 10,
            passes: 3,
        }
    }
}

impl WindowPlan {
    pub fn validate(&self) -> Result<(), RerankError> {
        if self.stride == 0 || self.stride > self.window || self.passes == 0 {
            return Err(RerankError::Plan(format!(
                "need 1 <= stride ({}) <= window ({}) and passes ({}) >= 1",
                self.stride, self.window, self.passes
            )));
        }
        Ok(())
    }
}

/// What a backend sends back for one window.
#[derive(Debug, Clone, PartialEq)]
pub enum RawPermutation {
    /// Listwise model text with 1-based identifiers, e.g. `[2] > [1]`.
    Text(String),
    /// 0-based window positions, possibly malformed.
    Positions(Vec<i64>),
}

impl RawPermutation {
    pub fn repair(self, n: usize) -> Vec<usize> {
        match self {
            RawPermutation::Text(t) => parse_permutation(&t, n),
            RawPermutation::Positions(p) => repair_permutation(p, n),
        }
    }
}

pub trait RerankerBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Largest window the backend accepts.
    fn max_window(&self) -> usize;

    /// Orders one window of candidates, most relevant first.
    fn permute(&self, topic: &str, window: &[Candidate]) -> Result<RawPermutation, BackendError>;
}

#[derive(Debug, thiserror::Error)]
pub enum RerankError {
    #[error("invalid window plan: {0}")]
    Plan(String),
    #[error("cannot rerank an empty list")]
    EmptyList,
    #[error("window {window} exceeds backend {backend} limit of {max}")]
    WindowTooLarge { backend: String, window: usize, max: usize },
    #[error("backend {backend} failed on window [{start}, {end}) of topic {topic_id}: {source}")]
    Backend {
        backend: String,
        topic_id: String,
        start: usize,
        end: usize,
        source: BackendError,
    },
}

/// One back-to-front sliding-window pass. The last `window` items are
/// reordered first; each following window starts `stride` earlier, so the
/// best items of a window are carried into the next. Scores become `1/rank`.
pub fn sliding_window_pass(
    list: &RankedList,
    backend: &dyn RerankerBackend,
    plan: &WindowPlan,
) -> Result<RankedList, RerankError> {
    plan.validate()?;
    if list.items.is_empty() {
        return Err(RerankError::EmptyList);
    }
    if plan.window > backend.max_window() {
        return Err(RerankError::WindowTooLarge {
            backend: backend.name().to_string(),
            window: plan.window,
            max: backend.max_window(),
        });
    }
    let mut items = list.items.clone();
    let mut end = items.len();
    loop {
        let start = end.saturating_sub(plan.window);
        let window = &items[start..end];
        let raw = backend
            .permute(&list.query, window)
            .map_err(|source| RerankError::Backend {
                backend: backend.name().to_string(),
                topic_id: list.topic_id.clone(),
                start,
                end,
                source,
            })?;
        let order = raw.repair(window.len());
        let reordered: Vec<Candidate> = order.into_iter().map(|i| window[i].clone()).collect();
        items.splice(start..end, reordered);
        if start == 0 {
            break;
        }
        end -= plan.stride;
    }
    for (i, c) in items.iter_mut().enumerate() {
        c.score = 1.0 / (i + 1) as f64;
    }
    Ok(RankedList {
        topic_id: list.topic_id.clone(),
        query: list.query.clone(),
        items,
    })
}

/// `plan.passes` sliding-window passes, each consuming the previous output.
pub fn progressive_rerank(
    list: &RankedList,
    backend: &dyn RerankerBackend,
    plan: &WindowPlan,
) -> Result<RankedList, RerankError> {
    plan.validate()?;
    let mut cur = sliding_window_pass(list, backend, plan)?;
    for _ in 1..plan.passes {
        cur = sliding_window_pass(&cur, backend, plan)?;
    }
    Ok(cur)
}

/// First `min(k, len)` items.
pub fn truncate_top_k(list: &RankedList, k: usize) -> RankedList {
    RankedList {
        topic_id: list.topic_id.clone(),
        query: list.query.clone(),
        items: list.items.iter().take(k).cloned().collect(),
    }
}
