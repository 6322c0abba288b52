//! Rule-based sentence boundary detection.
//!
//! A boundary is a run of `.`, `?` or `!` (plus any closing quotes or
//! brackets) followed by whitespace and then an uppercase letter, a digit,
//! or an opening quote. A period does not end a sentence when the word in
//! front of it is on the abbreviation allowlist or is a single capital
//! letter (an initial). Text after the last boundary is its own sentence.

use std::ops::Range;

pub const SPLITTER_VERSION: &str = "rules-v1";

/// Lowercased words (without the final period) that never end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "approx", "ave", "capt", "co", "col", "corp", "dept", "dr", "e.g", "fig", "gen", "gov", "i.e",
    "inc", "jr", "lt", "ltd", "mr", "mrs", "ms", "mt", "prof", "rep", "sen", "sgt", "sr", "st",
    "u.k", "u.s", "vol", "vs",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, '.' | '?' | '!' | '"' | '\'' | ')' | ']' | '”' | '’' | '»')
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || matches!(c, '"' | '\'' | '“' | '‘' | '«')
}

fn is_abbreviation(text: &str, dot: usize) -> bool {
    let before = &text[..dot];
    let word_start = before
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let word = before[word_start..].trim_start_matches(|c: char| !c.is_alphanumeric());
    let mut chars = word.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_uppercase() {
            return true;
        }
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Sentence spans as byte ranges into `text`.
pub fn sentence_byte_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if start.is_none() && !c.is_whitespace() {
            start = Some(i);
        }
        if !is_terminal(c) || start.is_none() {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, n)) = iter.peek() {
            if is_closer(n) {
                end = j + n.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        let rest = &text[end..];
        let trimmed = rest.trim_start();
        let boundary = if trimmed.is_empty() {
            true
        } else if trimmed.len() == rest.len() {
            false
        } else {
            let next = trimmed.chars().next().unwrap();
            starts_sentence(next) && !(c == '.' && is_abbreviation(text, i))
        };
        if boundary {
            spans.push(start.take().unwrap()..end);
        }
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        spans.push(s..end);
    }
    spans
}

/// Sentence spans as `(start_char, end_char)` offsets counted in Unicode
/// scalar values.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let spans = sentence_byte_spans(text);
    let index = CharIndex::new(text);
    spans
        .into_iter()
        .map(|r| (index.char_of(r.start), index.char_of(r.end)))
        .collect()
}

/// Byte-offset to char-offset lookup for one string.
pub struct CharIndex {
    /// byte offset of every char boundary, plus `len` at the end
    bounds: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        let mut bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
        bounds.push(text.len());
        Self { bounds }
    }

    pub fn char_len(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Panics if `byte` is not a char boundary.
    pub fn char_of(&self, byte: usize) -> usize {
        self.bounds
            .binary_search(&byte)
            .unwrap_or_else(|_| panic!("byte offset {byte} is not a char boundary"))
    }

    pub fn byte_of(&self, ch: usize) -> Option<usize> {
        self.bounds.get(ch).copied()
    }
}

/// Slice `text` by char offsets. `None` when out of range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let idx = CharIndex::new(text);
    Some(&text[idx.byte_of(start)?..idx.byte_of(end)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sents(text: &str) -> Vec<&str> {
        sentence_byte_spans(text).into_iter().map(|r| &text[r]).collect()
    }

    #[test]
    fn two_simple_sentences() {
        assert_eq!(sents("A b. C d."), vec!["A b.", "C d."]);
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(
            sents("Dr. Smith arrived. He left."),
            vec!["Dr. Smith arrived.", "He left."]
        );
    }

    #[test]
    fn abbreviation_fixtures() {
        // hand-checked fixture list
        let cases: &[(&str, &[&str])] = &[
            ("Mr. and Mrs. Jones came. They sat.", &["Mr. and Mrs. Jones came.", "They sat."]),
            ("Dr. Carrie M. Brown recommends trips. Stay calm.", &["Dr. Carrie M. Brown recommends trips.", "Stay calm."]),
            ("Use tools, e.g. Hammers are fine. Go.", &["Use tools, e.g. Hammers are fine.", "Go."]),
            ("He moved to the U.S. Later he left.", &["He moved to the U.S. Later he left."]),
            ("Pi is 3.14 today. Yes.", &["Pi is 3.14 today.", "Yes."]),
            ("Really? Yes! Ok.", &["Really?", "Yes!", "Ok."]),
            ("She said \"stop.\" Then left.", &["She said \"stop.\"", "Then left."]),
            ("lower case. after period", &["lower case. after period"]),
            ("It costs $5. 2017 was better.", &["It costs $5.", "2017 was better."]),
        ];
        for (text, expected) in cases {
            assert_eq!(&sents(text), expected, "text: {text}");
        }
    }

    #[test]
    fn trailing_fragment_is_a_sentence() {
        assert_eq!(sents("no terminal punctuation"), vec!["no terminal punctuation"]);
        assert_eq!(sents("One. two three  "), vec!["One. two three"]);
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("  \n\t ").is_empty());
    }

    #[test]
    fn char_offsets_count_scalars() {
        let text = "Café é. Über alles.";
        let spans = split_sentences(text);
        assert_eq!(spans, vec![(0, 7), (8, 19)]);
        assert_eq!(char_slice(text, 8, 19), Some("Über alles."));
    }

    #[test]
    fn spans_cover_all_non_whitespace() {
        let text = "  First one.  Second?\n\nThird!  trailing bit ";
        let spans = sentence_byte_spans(text);
        let mut covered = vec![false; text.len()];
        let mut prev_end = 0;
        for r in &spans {
            assert!(r.start >= prev_end);
            prev_end = r.end;
            for b in r.clone() {
                covered[b] = true;
            }
        }
        for (i, c) in text.char_indices() {
            if !c.is_whitespace() {
                assert!(covered[i], "char {c:?} at {i} uncovered");
            }
        }
    }
}
