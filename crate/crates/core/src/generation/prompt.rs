use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::backend::fill_template;
use crate::ragio::MAX_REFERENCES;
use crate::rerank::Candidate;

pub const CHATQA_TEMPLATE_ID: &str = "chatqa_v1";
pub const CHATQA_TEMPLATE: &str = include_str!("../../templates/chatqa_v1.txt");

const SYSTEM_PREFIX: &str = "System: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub topic: String,
    pub system: String,
    pub user: String,
    pub context_count: usize,
    /// `mapping[i]` is the segment id shown as context `[i + 1]`.
    pub mapping: Vec<String>,
}

impl PromptBundle {
    /// The prompt as one block of text, exactly as the template lays it out.
    pub fn as_single_text(&self) -> String {
        format!("{SYSTEM_PREFIX}{}\n\n{}", self.system, self.user)
    }

    pub fn contexts(&self) -> impl Iterator<Item = (usize, &str)> {
        self.mapping.iter().enumerate().map(|(i, id)| (i + 1, id.as_str()))
    }
}

/// Renders the answer-generation prompt over the reranked segments. Context
/// numbers follow the order of `segments`.
pub fn render_chatqa_prompt(topic: &str, segments: &[Candidate]) -> Result<PromptBundle, GenerationError> {
    if segments.is_empty() {
        return Err(GenerationError::NoContexts);
    }
    if segments.len() > MAX_REFERENCES {
        return Err(GenerationError::TooManyContexts(segments.len()));
    }
    let contexts = segments
        .iter()
        .enumerate()
        .map(|(i, s)| format!("[{}] {}: {}", i + 1, s.title, s.text))
        .collect::<Vec<_>>()
        .join("\n");
    let template = CHATQA_TEMPLATE.trim_end_matches('\n');
    let (system, user) = template
        .split_once("\n\n")
        .expect("template has a system paragraph");
    let system = system.strip_prefix(SYSTEM_PREFIX).unwrap_or(system);
    Ok(PromptBundle {
        topic: topic.to_string(),
        system: system.to_string(),
        user: fill_template(user, &[("query", topic), ("contexts", &contexts)]),
        context_count: segments.len(),
        mapping: segments.iter().map(|s| s.segment_id.clone()).collect(),
    })
}
