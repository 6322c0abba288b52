//! Augmented generation: prompt rendering, generator backends, and the
//! conversion of raw model output into cited answer sentences.

mod backends;
mod citations;
mod prompt;

pub use backends::{ChatGenerator, MockExtractive, MockSpan, SpanApiGenerator};
pub use citations::{
    map_span_citations, parse_inline_citations, parse_inline_citations_detailed, render_inline, restore,
    to_zero_based, CitedSentence, MarkerStyle, ParsedSentence, RawGeneration, Removals, SpanCitation,
};
pub use prompt::{render_chatqa_prompt, PromptBundle, CHATQA_TEMPLATE, CHATQA_TEMPLATE_ID};

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::ragio::AnswerSentence;
use crate::rerank::Candidate;

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("no contexts to generate from")]
    NoContexts,
    #[error("{0} contexts exceed the limit of 20")]
    TooManyContexts(usize),
    #[error("span citation {start}..{end} outside text of {len} chars")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("empty answer")]
    EmptyAnswer,
    #[error("generator {backend}: {source}")]
    Backend {
        backend: String,
        #[source]
        source: BackendError,
    },
}

/// How a backend reports what it cites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CitationMode {
    /// Bracket markers in the text.
    Inline,
    /// Character spans alongside the text.
    Span,
}

pub trait GeneratorBackend: Send + Sync {
    fn name(&self) -> &str;
    fn citation_mode(&self) -> CitationMode;
    fn generate(&self, prompt: &PromptBundle, contexts: &[Candidate]) -> Result<RawGeneration, BackendError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub answer: Vec<AnswerSentence>,
    /// Segment ids in rank order; citations index into this list.
    pub references: Vec<String>,
    pub dropped_citations: usize,
}

/// Converts raw output into sentences with 1-based context numbers.
pub fn parse_raw(raw: &RawGeneration, mode: CitationMode) -> Result<Vec<CitedSentence>, GenerationError> {
    match mode {
        CitationMode::Inline => Ok(parse_inline_citations(&raw.text)),
        CitationMode::Span => map_span_citations(raw),
    }
}

/// Renders the prompt over `segments`, calls the backend, and returns the
/// cited answer with zero-based citations.
pub fn generate(topic: &str, segments: &[Candidate], backend: &dyn GeneratorBackend) -> Result<Generated, GenerationError> {
    let prompt = render_chatqa_prompt(topic, segments)?;
    let raw = backend.generate(&prompt, segments).map_err(|source| GenerationError::Backend {
        backend: backend.name().to_string(),
        source,
    })?;
    if raw.text.trim().is_empty() {
        return Err(GenerationError::EmptyAnswer);
    }
    let sentences = parse_raw(&raw, backend.citation_mode())?;
    if sentences.is_empty() {
        return Err(GenerationError::EmptyAnswer);
    }
    let (answer, dropped_citations) = to_zero_based(&sentences, prompt.context_count);
    Ok(Generated {
        answer,
        references: prompt.mapping,
        dropped_citations,
    })
}
