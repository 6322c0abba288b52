use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{CorpusError, Segment};

/// Segment lookup by id, loaded from the segment JSONL.
#[derive(Debug, Clone, Default)]
pub struct SegmentStore {
    segments: HashMap<String, Segment>,
}

impl SegmentStore {
    pub fn from_segments(segs: impl IntoIterator<Item = Segment>) -> Result<Self, CorpusError> {
        let mut segments = HashMap::new();
        for (i, s) in segs.into_iter().enumerate() {
            let id = s.segment_id.clone();
            if segments.insert(id.clone(), s).is_some() {
                return Err(CorpusError::DuplicateDocId { line: i + 1, doc_id: id });
            }
        }
        Ok(Self { segments })
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut segs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let seg = Segment::from_json_line(&line)
                .map_err(|reason| CorpusError::Malformed { line: i + 1, reason })?;
            segs.push(seg);
        }
        Self::from_segments(segs)
    }

    pub fn open(path: &Path) -> Result<Self, CorpusError> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    pub fn get(&self, id: &str) -> Option<&Segment> {
        self.segments.get(id)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Segments sorted by id.
    pub fn sorted(&self) -> Vec<&Segment> {
        let mut v: Vec<&Segment> = self.segments.values().collect();
        v.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_and_looks_up() {
        let jsonl = concat!(
            r#"{"docid":"d#0","url":"u","title":"T","headings":"","segment":"Hello.","start_char":0,"end_char":6}"#,
            "\n",
            r#"{"docid":"d#1","url":"u","title":"T","headings":"","segment":"Bye.","start_char":7,"end_char":11}"#,
            "\n"
        );
        let store = SegmentStore::read_jsonl(jsonl.as_bytes()).unwrap();
        assert_eq!(store.len(), 2);
        let s = store.get("d#1").unwrap();
        assert_eq!((s.doc_id.as_str(), s.ordinal, s.text.as_str()), ("d", 1, "Bye."));
        assert!(store.get("d#2").is_none());
    }

    #[test]
    fn bad_line_reports_number() {
        let err = SegmentStore::read_jsonl("\n{oops}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }
}
