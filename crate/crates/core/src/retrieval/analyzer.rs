use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};

pub const ANALYZER_VERSION: &str = "en-snowball-v1";

/// Lucene's default English stopword set.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Lowercase, split on non-alphanumerics, drop stopwords, stem. Used for both
/// indexing and queries.
pub fn analyze(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .map(|t| STEMMER.stem(t).into_owned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_fixture() {
        assert_eq!(analyze("Potty-Training tips"), vec!["potti", "train", "tip"]);
        assert_eq!(
            analyze("How often should you take your toddler to the potty?"),
            vec!["how", "often", "should", "you", "take", "your", "toddler", "potti"]
        );
    }

    #[test]
    fn empty_and_stopwords() {
        assert!(analyze("").is_empty());
        assert!(analyze("THE the The").is_empty());
        assert!(analyze(" -- !! ").is_empty());
    }

    #[test]
    fn keeps_digits() {
        assert_eq!(analyze("TREC 2024"), vec!["trec", "2024"]);
    }
}
