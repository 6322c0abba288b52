//! Citation handling for generated answers: in-line bracket markers, span
//! citations, and the shift to zero-based reference positions.

use std::collections::BTreeSet;
use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::corpus::{sentence_byte_spans, split_sentences};
use crate::ragio::AnswerSentence;

/// Longest `[a]-[b]` range that is expanded; longer ones keep only their
/// endpoints.
const MAX_RANGE: usize = 100;

fn group_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\s*\d{1,6}(?:\s*,\s*\d{1,6})*\s*\]").unwrap())
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+").unwrap())
}

/// A sentence with 1-based context numbers, before mapping onto references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedSentence {
    pub text: String,
    pub citations: BTreeSet<usize>,
}

impl CitedSentence {
    pub fn new(text: impl Into<String>, citations: impl IntoIterator<Item = usize>) -> Self {
        Self {
            text: text.into(),
            citations: citations.into_iter().collect(),
        }
    }
}

/// A run of adjacent bracket groups and their separators.
#[derive(Debug, Clone)]
struct Cluster {
    bytes: Range<usize>,
    numbers: BTreeSet<usize>,
}

fn group_numbers(group: &str) -> Vec<usize> {
    number_re()
        .find_iter(group)
        .map(|m| m.as_str().parse().unwrap())
        .collect()
}

fn find_clusters(text: &str) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut last_group: Option<(usize, Vec<usize>)> = None;
    for m in group_re().find_iter(text) {
        let nums = group_numbers(m.as_str());
        let joined = match (&last_group, clusters.last_mut()) {
            (Some((prev_end, prev_nums)), Some(cluster)) => {
                let gap = text[*prev_end..m.start()].trim();
                match gap {
                    "" | "," | ";" => {
                        cluster.numbers.extend(nums.iter().copied());
                        cluster.bytes.end = m.end();
                        true
                    }
                    "-" | "\u{2013}" => {
                        let a = *prev_nums.last().unwrap();
                        let b = nums[0];
                        let (lo, hi) = (a.min(b), a.max(b));
                        if hi - lo <= MAX_RANGE {
                            cluster.numbers.extend(lo..=hi);
                        }
                        cluster.numbers.extend(nums.iter().copied());
                        cluster.bytes.end = m.end();
                        true
                    }
                    _ => false,
                }
            }
            _ => false,
        };
        if !joined {
            clusters.push(Cluster {
                bytes: m.start()..m.end(),
                numbers: nums.iter().copied().collect(),
            });
        }
        last_group = Some((m.end(), nums));
    }
    clusters
}

/// Text removed while stripping one sentence: `(offset in stripped text,
/// removed text)`, in ascending offset order.
pub type Removals = Vec<(usize, String)>;

/// Re-inserts removed text; the inverse of the stripping done by
/// [`parse_inline_citations_detailed`].
pub fn restore(stripped: &str, removals: &Removals) -> String {
    let mut out = String::with_capacity(stripped.len());
    let mut pos = 0;
    for (at, piece) in removals {
        out.push_str(&stripped[pos..*at]);
        out.push_str(piece);
        pos = *at;
    }
    out.push_str(&stripped[pos..]);
    out
}

/// One parsed sentence together with the raw sentence text and what was
/// removed from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSentence {
    pub sentence: CitedSentence,
    pub raw: String,
    pub removals: Removals,
}

fn strip_sentence(raw: &str, base: usize, clusters: &[Cluster]) -> (String, Removals) {
    let bytes = raw.as_bytes();
    let mut drop = vec![false; raw.len()];
    for c in clusters {
        let s = c.bytes.start.max(base) - base;
        let e = c.bytes.end.min(base + raw.len()).saturating_sub(base);
        drop[s..e.max(s)].iter_mut().for_each(|d| *d = true);
    }
    // Whitespace around a removed marker collapses to one space, or to
    // nothing at the sentence edges and before closing punctuation.
    let mut i = 0;
    while i < raw.len() {
        if !(drop[i] || bytes[i].is_ascii_whitespace()) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < raw.len() && (drop[j] || bytes[j].is_ascii_whitespace()) {
            j += 1;
        }
        if (i..j).any(|k| drop[k]) {
            let next = raw[j..].chars().next();
            let keep_space = i > 0 && j < raw.len() && !next.is_some_and(|c| ".,;:!?)]}\"'".contains(c));
            let mut kept = false;
            for k in i..j {
                if drop[k] {
                    continue;
                }
                if keep_space && !kept {
                    kept = true;
                } else {
                    drop[k] = true;
                }
            }
        }
        i = j;
    }
    let mut stripped = String::with_capacity(raw.len());
    let mut removals: Removals = Vec::new();
    let mut cur: Option<String> = None;
    for (k, ch) in raw.char_indices() {
        if drop[k] {
            cur.get_or_insert_with(String::new).push(ch);
        } else {
            if let Some(piece) = cur.take() {
                removals.push((stripped.len(), piece));
            }
            stripped.push(ch);
        }
    }
    if let Some(piece) = cur.take() {
        removals.push((stripped.len(), piece));
    }
    (stripped, removals)
}

/// Like [`parse_inline_citations`] but also returns each raw sentence and
/// the removed marker text.
pub fn parse_inline_citations_detailed(text: &str) -> Vec<ParsedSentence> {
    let clusters = find_clusters(text);
    let mut masked = text.as_bytes().to_vec();
    for c in &clusters {
        masked[c.bytes.clone()].iter_mut().for_each(|b| *b = b' ');
    }
    // markers are ASCII, so masking keeps UTF-8 valid
    let masked = String::from_utf8(masked).expect("ascii mask");
    let spans = sentence_byte_spans(&masked);
    let mut out = Vec::with_capacity(spans.len());
    for (k, span) in spans.iter().enumerate() {
        let start = if k == 0 { 0 } else { span.start };
        let end = spans.get(k + 1).map_or(text.len(), |n| n.start);
        let region = &text[start..end];
        let lead = region.len() - region.trim_start().len();
        let raw = region.trim();
        let base = start + lead;
        let mine: Vec<Cluster> = clusters
            .iter()
            .filter(|c| c.bytes.start < base + raw.len() && c.bytes.end > base)
            .cloned()
            .collect();
        let (stripped, removals) = strip_sentence(raw, base, &mine);
        if stripped.trim().is_empty() {
            continue;
        }
        let citations = mine
            .iter()
            .flat_map(|c| c.numbers.iter().copied())
            .collect();
        out.push(ParsedSentence {
            sentence: CitedSentence {
                text: stripped,
                citations,
            },
            raw: raw.to_string(),
            removals,
        });
    }
    out
}

/// Splits `text` into sentences, attaches in-line bracket citations (`[3]`,
/// `[1, 4]`, `[2]-[5]`) to the sentence they appear in or trail, and strips
/// the markers. Unmatched brackets stay as literal text.
pub fn parse_inline_citations(text: &str) -> Vec<CitedSentence> {
    parse_inline_citations_detailed(text)
        .into_iter()
        .map(|p| p.sentence)
        .collect()
}

/// A cited character span of generated text. `contexts` are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCitation {
    pub start_char: usize,
    pub end_char: usize,
    pub contexts: Vec<usize>,
}

/// Raw backend output: text, and for span-citing models the cited spans.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawGeneration {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_citations: Option<Vec<SpanCitation>>,
}

/// Each sentence gets the union of contexts of every span overlapping its
/// character range.
pub fn map_span_citations(raw: &RawGeneration) -> Result<Vec<CitedSentence>, GenerationError> {
    let len = raw.text.chars().count();
    let spans = raw.span_citations.as_deref().unwrap_or_default();
    for s in spans {
        if s.start_char > s.end_char || s.end_char > len {
            return Err(GenerationError::SpanOutOfRange {
                start: s.start_char,
                end: s.end_char,
                len,
            });
        }
    }
    let sentences = split_sentences(&raw.text);
    let chars: Vec<char> = raw.text.chars().collect();
    Ok(sentences
        .into_iter()
        .map(|(a, b)| {
            let citations = spans
                .iter()
                .filter(|s| s.start_char < b && a < s.end_char)
                .flat_map(|s| s.contexts.iter().copied())
                .collect();
            CitedSentence {
                text: chars[a..b].iter().collect(),
                citations,
            }
        })
        .collect())
}

/// Shifts 1-based context numbers to 0-based reference positions. Numbers
/// outside `1..=num_references` are dropped and counted.
pub fn to_zero_based(sentences: &[CitedSentence], num_references: usize) -> (Vec<AnswerSentence>, usize) {
    let mut dropped = 0;
    let out = sentences
        .iter()
        .map(|s| {
            let cites: Vec<usize> = s
                .citations
                .iter()
                .filter_map(|&n| {
                    if (1..=num_references).contains(&n) {
                        Some(n - 1)
                    } else {
                        dropped += 1;
                        None
                    }
                })
                .collect();
            AnswerSentence::new(s.text.clone(), cites)
        })
        .collect();
    if dropped > 0 {
        log::warn!("dropped {dropped} out-of-range citation(s)");
    }
    (out, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerStyle {
    /// `[1], [2], [3]`
    Separate,
    /// `[1, 2, 3]`
    Grouped,
    /// `[1]-[3]` for runs of three or more, otherwise separate
    Ranges,
}

fn render_markers(cites: &BTreeSet<usize>, style: MarkerStyle) -> String {
    let nums: Vec<usize> = cites.iter().copied().collect();
    match style {
        MarkerStyle::Separate => nums.iter().map(|n| format!("[{n}]")).collect::<Vec<_>>().join(", "),
        MarkerStyle::Grouped => format!(
            "[{}]",
            nums.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ")
        ),
        MarkerStyle::Ranges => {
            let mut parts = Vec::new();
            let mut i = 0;
            while i < nums.len() {
                let mut j = i;
                while j + 1 < nums.len() && nums[j + 1] == nums[j] + 1 {
                    j += 1;
                }
                if j - i >= 2 {
                    parts.push(format!("[{}]-[{}]", nums[i], nums[j]));
                } else {
                    parts.extend(nums[i..=j].iter().map(|n| format!("[{n}]")));
                }
                i = j + 1;
            }
            parts.join(", ")
        }
    }
}

/// Renders sentences with in-line markers placed before each sentence's
/// terminal punctuation, joined by single spaces.
pub fn render_inline(sentences: &[CitedSentence], style: MarkerStyle) -> String {
    sentences
        .iter()
        .map(|s| {
            if s.citations.is_empty() {
                return s.text.clone();
            }
            let body = s.text.trim_end_matches(['.', '?', '!', '"', '\'', ')']);
            let tail = &s.text[body.len()..];
            format!("{body} {}{tail}", render_markers(&s.citations, style))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(text: &str, c: &[usize]) -> CitedSentence {
        CitedSentence::new(text, c.iter().copied())
    }

    #[test]
    fn two_sentences_with_markers() {
        assert_eq!(
            parse_inline_citations("Cats sleep [1], [3]. Dogs bark [2]."),
            vec![cs("Cats sleep.", &[1, 3]), cs("Dogs bark.", &[2])]
        );
    }

    #[test]
    fn no_citations() {
        assert_eq!(parse_inline_citations("No citations here."), vec![cs("No citations here.", &[])]);
    }

    #[test]
    fn comma_group() {
        assert_eq!(parse_inline_citations("Both [1, 2] apply."), vec![cs("Both apply.", &[1, 2])]);
    }

    #[test]
    fn range_expands() {
        assert_eq!(parse_inline_citations("All agree [2]-[5]."), vec![cs("All agree.", &[2, 3, 4, 5])]);
        assert_eq!(parse_inline_citations("All agree [2]\u{2013}[4]."), vec![cs("All agree.", &[2, 3, 4])]);
    }

    #[test]
    fn marker_after_period_goes_to_previous_sentence() {
        assert_eq!(
            parse_inline_citations("Cats sleep. [4] Dogs bark."),
            vec![cs("Cats sleep.", &[4]), cs("Dogs bark.", &[])]
        );
    }

    #[test]
    fn unparseable_brackets_are_literal() {
        assert_eq!(
            parse_inline_citations("See [a] and [1 2] here."),
            vec![cs("See [a] and [1 2] here.", &[])]
        );
    }

    #[test]
    fn marker_only_sentence_dropped() {
        assert_eq!(parse_inline_citations("Fine. [1]"), vec![cs("Fine.", &[1])]);
        assert!(parse_inline_citations("[1] [2]").is_empty());
    }

    #[test]
    fn removal_restores_raw_sentence() {
        for text in ["Cats  sleep [1],   [3] now. Dogs [2]bark [4] .", "[7] Lead. Mid [1] [2] end."] {
            for p in parse_inline_citations_detailed(text) {
                assert_eq!(restore(&p.sentence.text, &p.removals), p.raw);
            }
        }
    }

    #[test]
    fn span_single_sentence() {
        let raw = RawGeneration {
            text: "Alpha one. Beta two.".into(),
            span_citations: Some(vec![SpanCitation { start_char: 0, end_char: 5, contexts: vec![2] }]),
        };
        assert_eq!(
            map_span_citations(&raw).unwrap(),
            vec![cs("Alpha one.", &[2]), cs("Beta two.", &[])]
        );
    }

    #[test]
    fn span_straddling_boundary() {
        let raw = RawGeneration {
            text: "Alpha one. Beta two.".into(),
            span_citations: Some(vec![SpanCitation { start_char: 6, end_char: 15, contexts: vec![1] }]),
        };
        assert_eq!(
            map_span_citations(&raw).unwrap(),
            vec![cs("Alpha one.", &[1]), cs("Beta two.", &[1])]
        );
    }

    #[test]
    fn spans_union_on_one_sentence() {
        let raw = RawGeneration {
            text: "Alpha one. Beta two.".into(),
            span_citations: Some(vec![
                SpanCitation { start_char: 11, end_char: 15, contexts: vec![1] },
                SpanCitation { start_char: 16, end_char: 19, contexts: vec![3] },
            ]),
        };
        assert_eq!(map_span_citations(&raw).unwrap()[1], cs("Beta two.", &[1, 3]));
    }

    #[test]
    fn span_outside_text_is_error() {
        let raw = RawGeneration {
            text: "Short.".into(),
            span_citations: Some(vec![SpanCitation { start_char: 2, end_char: 40, contexts: vec![1] }]),
        };
        assert!(matches!(map_span_citations(&raw), Err(GenerationError::SpanOutOfRange { .. })));
    }

    #[test]
    fn zero_basing() {
        let (out, dropped) = to_zero_based(&[cs("A.", &[1, 20, 21])], 20);
        assert_eq!(out[0].citations, vec![0, 19]);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn render_styles() {
        let s = [cs("Alpha.", &[1, 2, 3, 5])];
        assert_eq!(render_inline(&s, MarkerStyle::Separate), "Alpha [1], [2], [3], [5].");
        assert_eq!(render_inline(&s, MarkerStyle::Grouped), "Alpha [1, 2, 3, 5].");
        assert_eq!(render_inline(&s, MarkerStyle::Ranges), "Alpha [1]-[3], [5].");
        for style in [MarkerStyle::Separate, MarkerStyle::Grouped, MarkerStyle::Ranges] {
            assert_eq!(parse_inline_citations(&render_inline(&s, style)), s.to_vec());
        }
    }
}
