//! The RAG input/output contract: request, response, validation and the
//! JSONL batch submission format.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MAX_REFERENCES: usize = 20;

const RESPONSE_KEYS: [&str; 5] = ["run_id", "topic_id", "references", "response_length", "answer"];
const SENTENCE_KEYS: [&str; 2] = ["text", "citations"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagRequest {
    pub topic_id: String,
    pub topic: String,
}

impl RagRequest {
    pub fn validate(&self) -> Result<(), IoContractError> {
        if self.topic_id.trim().is_empty() || self.topic.trim().is_empty() {
            return Err(IoContractError::EmptyRequest);
        }
        Ok(())
    }
}

/// One answer sentence. `citations` are zero-based positions in the
/// response's `references`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSentence {
    pub text: String,
    pub citations: Vec<usize>,
}

impl AnswerSentence {
    pub fn new(text: impl Into<String>, citations: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = citations.into_iter().collect();
        Self {
            text: text.into(),
            citations: set.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagResponse {
    pub run_id: String,
    pub topic_id: String,
    pub references: Vec<String>,
    pub response_length: usize,
    pub answer: Vec<AnswerSentence>,
}

impl RagResponse {
    /// Builds a response with `response_length` computed from the answer.
    pub fn new(
        run_id: impl Into<String>,
        topic_id: impl Into<String>,
        references: Vec<String>,
        answer: Vec<AnswerSentence>,
    ) -> Self {
        Self {
            run_id: run_id.into(),
            topic_id: topic_id.into(),
            response_length: compute_response_length(&answer),
            references,
            answer,
        }
    }
}

/// Sum of sentence lengths in Unicode scalar values; no separators.
pub fn compute_response_length(answer: &[AnswerSentence]) -> usize {
    answer.iter().map(|s| s.text.chars().count()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyField(&'static str),
    TooManyReferences(usize),
    DuplicateReference(String),
    EmptySentence { sentence: usize },
    CitationOutOfRange { sentence: usize, citation: usize, references: usize },
    CitationsNotSorted { sentence: usize },
    ResponseLength { expected: usize, actual: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyField(k) => write!(f, "{k} is empty"),
            Violation::TooManyReferences(n) => {
                write!(f, "{n} references exceed the maximum of {MAX_REFERENCES}")
            }
            Violation::DuplicateReference(id) => write!(f, "duplicate reference {id:?}"),
            Violation::EmptySentence { sentence } => write!(f, "sentence {sentence} has empty text"),
            Violation::CitationOutOfRange { sentence, citation, references } => write!(
                f,
                "citation out of range: sentence {sentence} cites {citation} with {references} references"
            ),
            Violation::CitationsNotSorted { sentence } => {
                write!(f, "sentence {sentence} citations not sorted and unique")
            }
            Violation::ResponseLength { expected, actual } => {
                write!(f, "response_length mismatch: expected {expected}, actual {actual}")
            }
        }
    }
}

/// Every violated invariant, in a fixed order.
pub fn validate(resp: &RagResponse) -> Vec<Violation> {
    let mut out = Vec::new();
    if resp.run_id.is_empty() {
        out.push(Violation::EmptyField("run_id"));
    }
    if resp.topic_id.is_empty() {
        out.push(Violation::EmptyField("topic_id"));
    }
    if resp.references.len() > MAX_REFERENCES {
        out.push(Violation::TooManyReferences(resp.references.len()));
    }
    let mut seen = HashSet::new();
    for r in &resp.references {
        if !seen.insert(r) {
            out.push(Violation::DuplicateReference(r.clone()));
        }
    }
    for (i, s) in resp.answer.iter().enumerate() {
        if s.text.is_empty() {
            out.push(Violation::EmptySentence { sentence: i });
        }
        if s.citations.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Violation::CitationsNotSorted { sentence: i });
        }
        for &c in &s.citations {
            if c >= resp.references.len() {
                out.push(Violation::CitationOutOfRange {
                    sentence: i,
                    citation: c,
                    references: resp.references.len(),
                });
            }
        }
    }
    let expected = compute_response_length(&resp.answer);
    if expected != resp.response_length {
        out.push(Violation::ResponseLength {
            expected,
            actual: resp.response_length,
        });
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum IoContractError {
    #[error("topic_id and topic must be non-empty")]
    EmptyRequest,
    #[error("unknown keys {unknown:?}, missing keys {missing:?}")]
    Keys { unknown: Vec<String>, missing: Vec<String> },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<IoContractError> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Compact single-line JSON.
pub fn serialize(resp: &RagResponse) -> String {
    serde_json::to_string(resp).expect("RagResponse always serializes")
}

pub fn deserialize(text: &str) -> Result<RagResponse, IoContractError> {
    let value: Value = serde_json::from_str(text)?;
    check_keys(&value, &RESPONSE_KEYS, "")?;
    if let Some(Value::Array(answer)) = value.get("answer") {
        for (i, s) in answer.iter().enumerate() {
            check_keys(s, &SENTENCE_KEYS, &format!("answer[{i}]."))?;
        }
    }
    Ok(serde_json::from_value(value)?)
}

fn check_keys(value: &Value, expected: &[&str], prefix: &str) -> Result<(), IoContractError> {
    let Value::Object(map) = value else {
        return Ok(()); // serde reports the type error
    };
    let unknown: Vec<String> = map
        .keys()
        .filter(|k| !expected.contains(&k.as_str()))
        .map(|k| format!("{prefix}{k}"))
        .collect();
    let missing: Vec<String> = expected
        .iter()
        .filter(|k| !map.contains_key(**k))
        .map(|k| format!("{prefix}{k}"))
        .collect();
    if unknown.is_empty() && missing.is_empty() {
        Ok(())
    } else {
        Err(IoContractError::Keys { unknown, missing })
    }
}

pub fn write_batch<'a, W: Write>(mut out: W, responses: impl IntoIterator<Item = &'a RagResponse>) -> std::io::Result<()> {
    for r in responses {
        out.write_all(serialize(r).as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_batch<R: BufRead>(reader: R) -> Result<Vec<RagResponse>, IoContractError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(deserialize(&line).map_err(|e| IoContractError::Line {
            line: i + 1,
            source: Box::new(e),
        })?);
    }
    Ok(out)
}
