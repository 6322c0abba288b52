use std::io::Write;

use serde::{Deserialize, Serialize};

use super::sentences::{sentence_byte_spans, CharIndex};
use super::{CorpusError, Document};

/// A contiguous run of sentences from one document. Offsets are in Unicode
/// scalar values into the parent body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(rename = "docid")]
    pub segment_id: String,
    #[serde(skip)]
    pub doc_id: String,
    #[serde(skip)]
    pub ordinal: usize,
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub headings: String,
    #[serde(rename = "segment")]
    pub text: String,
    pub start_char: usize,
    pub end_char: usize,
}

impl Segment {
    /// Fills `doc_id`/`ordinal` from the segment id after deserialization.
    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let mut seg: Segment = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let (doc_id, ordinal) = parse_segment_id(&seg.segment_id)
            .ok_or_else(|| format!("bad segment id {:?}", seg.segment_id))?;
        seg.doc_id = doc_id.to_string();
        seg.ordinal = ordinal;
        Ok(seg)
    }
}

pub fn format_segment_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal}")
}

/// Inverse of [`format_segment_id`]; splits on the last `#`.
pub fn parse_segment_id(id: &str) -> Option<(&str, usize)> {
    let (doc, ord) = id.rsplit_once('#')?;
    if doc.is_empty() || ord.is_empty() || !ord.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((doc, ord.parse().ok()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub window: usize,
    pub stride: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self { window: 10, stride: 5 }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.stride == 0 || self.stride > self.window {
            return Err(CorpusError::Config(format!(
                "need 1 <= stride ({}) <= window ({})",
                self.stride, self.window
            )));
        }
        Ok(())
    }
}

/// Sentence-index ranges `[start, end)` of each window over `n` sentences.
/// Windows start at 0, stride, 2·stride, … and stop after the first window
/// that reaches the last sentence.
pub fn window_ranges(n: usize, cfg: SegmentConfig) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + cfg.window).min(n);
        out.push((start, end));
        if end == n {
            break;
        }
        start += cfg.stride;
    }
    out
}

pub fn segment_document(doc: &Document, cfg: SegmentConfig) -> Result<Vec<Segment>, CorpusError> {
    cfg.validate()?;
    let spans = sentence_byte_spans(&doc.body);
    let chars = CharIndex::new(&doc.body);
    Ok(window_ranges(spans.len(), cfg)
        .into_iter()
        .enumerate()
        .map(|(ordinal, (first, last))| {
            let bytes = spans[first].start..spans[last - 1].end;
            Segment {
                segment_id: format_segment_id(&doc.doc_id, ordinal),
                doc_id: doc.doc_id.clone(),
                ordinal,
                url: doc.url.clone(),
                title: doc.title.clone(),
                headings: doc.headings.clone(),
                text: doc.body[bytes.clone()].to_string(),
                start_char: chars.char_of(bytes.start),
                end_char: chars.char_of(bytes.end),
            }
        })
        .collect())
}

pub fn write_segments<'a, W: Write>(
    mut out: W,
    segs: impl IntoIterator<Item = &'a Segment>,
) -> std::io::Result<()> {
    for s in segs {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::char_slice;

    fn body(n: usize) -> String {
        (0..n).map(|i| format!("Sentence number {i} here.")).collect::<Vec<_>>().join(" ")
    }

    fn covered(segs: &[Segment], doc: &Document) -> Vec<(usize, usize)> {
        let sents = crate::corpus::split_sentences(&doc.body);
        segs.iter()
            .map(|s| {
                let first = sents.iter().position(|x| x.0 == s.start_char).unwrap();
                let last = sents.iter().position(|x| x.1 == s.end_char).unwrap();
                (first, last)
            })
            .collect()
    }

    #[test]
    fn ten_sentences_one_segment() {
        let d = Document::new("d", body(10));
        let segs = segment_document(&d, SegmentConfig::default()).unwrap();
        assert_eq!(covered(&segs, &d), vec![(0, 9)]);
        assert_eq!(segs[0].segment_id, "d#0");
    }

    #[test]
    fn twelve_sentences_two_segments() {
        let d = Document::new("d", body(12));
        let segs = segment_document(&d, SegmentConfig::default()).unwrap();
        assert_eq!(covered(&segs, &d), vec![(0, 9), (5, 11)]);
        assert_eq!(segs[1].segment_id, "d#1");
    }

    #[test]
    fn three_sentences_short_window() {
        let d = Document::new("d", body(3));
        let segs = segment_document(&d, SegmentConfig::default()).unwrap();
        assert_eq!(covered(&segs, &d), vec![(0, 2)]);
    }

    #[test]
    fn empty_body_no_segments() {
        let d = Document::new("d", "   ");
        assert!(segment_document(&d, SegmentConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn substring_property_with_multibyte() {
        let d = Document::new("d", "Ünïcode first. Second ü. Third ß here.");
        let segs = segment_document(&d, SegmentConfig { window: 2, stride: 1 }).unwrap();
        assert_eq!(segs.len(), 2);
        for s in &segs {
            assert_eq!(char_slice(&d.body, s.start_char, s.end_char), Some(s.text.as_str()));
        }
    }

    #[test]
    fn bad_stride_rejected() {
        let d = Document::new("d", body(3));
        assert!(segment_document(&d, SegmentConfig { window: 2, stride: 3 }).is_err());
        assert!(segment_document(&d, SegmentConfig { window: 2, stride: 0 }).is_err());
    }

    #[test]
    fn segment_id_round_trip() {
        assert_eq!(parse_segment_id("msmarco_doc_1#12"), Some(("msmarco_doc_1", 12)));
        assert_eq!(parse_segment_id("a#b#3"), Some(("a#b", 3)));
        assert_eq!(parse_segment_id("nohash"), None);
        assert_eq!(parse_segment_id("x#"), None);
    }

    #[test]
    fn json_schema_fields() {
        let d = Document {
            doc_id: "d".into(),
            url: "u".into(),
            title: "t".into(),
            headings: "h".into(),
            body: "One. Two.".into(),
        };
        let seg = segment_document(&d, SegmentConfig::default()).unwrap().remove(0);
        let line = serde_json::to_string(&seg).unwrap();
        assert_eq!(
            line,
            r#"{"docid":"d#0","url":"u","title":"t","headings":"h","segment":"One. Two.","start_char":0,"end_char":9}"#
        );
        assert_eq!(Segment::from_json_line(&line).unwrap(), seg);
    }
}
