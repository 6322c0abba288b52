use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CitationMode, GeneratorBackend, PromptBundle, RawGeneration, SpanCitation};
use crate::backend::{api_key, post_json_with_key, BackendError, ChatClient, ChatSettings, ConcurrencyLimit, RetryPolicy};
use crate::corpus::sentence_byte_spans;
use crate::rerank::Candidate;

/// First sentence of a context, cleaned so that it reads as one sentence:
/// brackets removed, leading punctuation dropped, first letter capitalised,
/// and terminal punctuation guaranteed. `None` for contexts with no words.
fn lead_sentence(text: &str) -> Option<String> {
    let cleaned: String = text.chars().filter(|c| !matches!(c, '[' | ']')).collect();
    let span = sentence_byte_spans(&cleaned).into_iter().next()?;
    let s = cleaned[span].trim_start_matches(|c: char| !c.is_alphanumeric()).trim_end();
    let mut chars = s.chars();
    let first = chars.next()?;
    let mut out: String = first.to_uppercase().chain(chars).collect();
    if !out.ends_with(['.', '?', '!']) {
        out = out.trim_end_matches(|c: char| !c.is_alphanumeric()).to_string();
        out.push('.');
    }
    Some(out)
}

fn split_terminal(s: &str) -> (&str, &str) {
    let body = s.trim_end_matches(['.', '?', '!', '"', '\'', ')']);
    (body, &s[body.len()..])
}

/// Offline generator: one sentence per context, the context's first
/// sentence followed by an in-line `[i]` marker.
#[derive(Debug, Default, Clone)]
pub struct MockExtractive;

impl GeneratorBackend for MockExtractive {
    fn name(&self) -> &str {
        "mock"
    }

    fn citation_mode(&self) -> CitationMode {
        CitationMode::Inline
    }

    fn generate(&self, _prompt: &PromptBundle, contexts: &[Candidate]) -> Result<RawGeneration, BackendError> {
        let text = contexts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let s = lead_sentence(&c.text)?;
                let (body, tail) = split_terminal(&s);
                Some(format!("{body} [{}]{tail}", i + 1))
            })
            .collect::<Vec<_>>()
            .join(" ");
        Ok(RawGeneration { text, span_citations: None })
    }
}

/// Offline span-citing generator: the same sentences as [`MockExtractive`]
/// without markers, each covered by a span citing its context.
#[derive(Debug, Default, Clone)]
pub struct MockSpan;

impl GeneratorBackend for MockSpan {
    fn name(&self) -> &str {
        "mock-span"
    }

    fn citation_mode(&self) -> CitationMode {
        CitationMode::Span
    }

    fn generate(&self, _prompt: &PromptBundle, contexts: &[Candidate]) -> Result<RawGeneration, BackendError> {
        let mut text = String::new();
        let mut spans = Vec::new();
        let mut pos = 0;
        for (i, c) in contexts.iter().enumerate() {
            let Some(s) = lead_sentence(&c.text) else { continue };
            if !text.is_empty() {
                text.push(' ');
                pos += 1;
            }
            let n = s.chars().count();
            spans.push(SpanCitation {
                start_char: pos,
                end_char: pos + n,
                contexts: vec![i + 1],
            });
            text.push_str(&s);
            pos += n;
        }
        Ok(RawGeneration {
            text,
            span_citations: Some(spans),
        })
    }
}

/// Generator over an OpenAI-compatible chat endpoint; the model cites
/// in-line.
pub struct ChatGenerator {
    client: ChatClient,
    name: String,
}

impl ChatGenerator {
    pub fn new(settings: ChatSettings) -> Result<Self, BackendError> {
        let name = format!("chat:{}", settings.model);
        Ok(Self {
            client: ChatClient::new(settings)?,
            name,
        })
    }
}

impl GeneratorBackend for ChatGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn citation_mode(&self) -> CitationMode {
        CitationMode::Inline
    }

    fn generate(&self, prompt: &PromptBundle, _contexts: &[Candidate]) -> Result<RawGeneration, BackendError> {
        let text = self.client.complete(&prompt.system, &prompt.user)?;
        Ok(RawGeneration { text, span_citations: None })
    }
}

#[derive(Serialize)]
struct SpanDoc<'a> {
    id: String,
    title: &'a str,
    snippet: &'a str,
}

#[derive(Serialize)]
struct SpanRequest<'a> {
    model: &'a str,
    message: &'a str,
    documents: Vec<SpanDoc<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct SpanReplyCitation {
    start: usize,
    end: usize,
    document_ids: Vec<String>,
}

#[derive(Deserialize)]
struct SpanReply {
    text: String,
    #[serde(default)]
    citations: Vec<SpanReplyCitation>,
}

/// Generator for grounded-chat APIs that take documents and return cited
/// character spans. Documents are sent as `doc_<i>` with `i` the 1-based
/// context number.
pub struct SpanApiGenerator {
    settings: ChatSettings,
    name: String,
    http: reqwest::blocking::Client,
    limit: ConcurrencyLimit,
}

impl SpanApiGenerator {
    pub fn new(settings: ChatSettings) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            name: format!("span:{}", settings.model),
            limit: ConcurrencyLimit::new(settings.concurrency),
            settings,
            http,
        })
    }

    pub fn retry(&self) -> RetryPolicy {
        self.settings.retry
    }
}

fn doc_number(id: &str) -> Option<usize> {
    id.strip_prefix("doc_")?.parse().ok()
}

impl GeneratorBackend for SpanApiGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn citation_mode(&self) -> CitationMode {
        CitationMode::Span
    }

    fn generate(&self, prompt: &PromptBundle, contexts: &[Candidate]) -> Result<RawGeneration, BackendError> {
        let key = api_key(self.settings.api_key_env.as_deref())?;
        let body = SpanRequest {
            model: &self.settings.model,
            message: &prompt.topic,
            documents: contexts
                .iter()
                .enumerate()
                .map(|(i, c)| SpanDoc {
                    id: format!("doc_{}", i + 1),
                    title: &c.title,
                    snippet: &c.text,
                })
                .collect(),
            temperature: self.settings.temperature,
        };
        let _permit = self.limit.acquire();
        let reply: SpanReply = post_json_with_key(&self.http, &self.settings.url, key.as_deref(), &body, self.settings.retry)?;
        let spans = reply
            .citations
            .into_iter()
            .map(|c| SpanCitation {
                start_char: c.start,
                end_char: c.end,
                // unknown ids map to 0, which zero-basing drops and counts
                contexts: c.document_ids.iter().map(|d| doc_number(d).unwrap_or(0)).collect(),
            })
            .collect();
        Ok(RawGeneration {
            text: reply.text,
            span_citations: Some(spans),
        })
    }
}
