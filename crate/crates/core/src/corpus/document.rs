use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// One record of a raw document collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "docid")]
    pub doc_id: String,
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub headings: String,
    pub body: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            url: String::new(),
            title: String::new(),
            headings: String::new(),
            body: body.into(),
        }
    }
}

/// Streaming JSONL reader. Blank lines are skipped; every other line must be
/// a JSON object with at least `docid` and `body`.
pub struct DocumentStream<R> {
    reader: R,
    line_no: usize,
    seen: HashSet<String>,
    buf: String,
    done: bool,
}

pub fn parse_document_stream<R: BufRead>(reader: R) -> DocumentStream<R> {
    DocumentStream {
        reader,
        line_no: 0,
        seen: HashSet::new(),
        buf: String::new(),
        done: false,
    }
}

impl<R: BufRead> Iterator for DocumentStream<R> {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(CorpusError::Io(e)));
                }
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let doc: Document = match serde_json::from_str(line) {
                Ok(d) => d,
                Err(e) => {
                    self.done = true;
                    return Some(Err(CorpusError::Malformed {
                        line: self.line_no,
                        reason: e.to_string(),
                    }));
                }
            };
            if doc.doc_id.is_empty() {
                self.done = true;
                return Some(Err(CorpusError::Malformed {
                    line: self.line_no,
                    reason: "empty docid".into(),
                }));
            }
            if !self.seen.insert(doc.doc_id.clone()) {
                self.done = true;
                return Some(Err(CorpusError::DuplicateDocId {
                    line: self.line_no,
                    doc_id: doc.doc_id,
                }));
            }
            return Some(Ok(doc));
        }
    }
}

pub fn write_documents<'a, W: Write>(
    mut out: W,
    docs: impl IntoIterator<Item = &'a Document>,
) -> std::io::Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
