use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{analyze, InvertedIndex, RetrievalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1 >= 0.0) || !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::Params(format!(
                "need k1 >= 0 and 0 <= b <= 1, got k1={} b={}",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub segment_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, non-negative for `0 <= df <= N`.
pub fn idf(num_docs: usize, df: usize) -> f64 {
    let (n, df) = (num_docs as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn term_weight(idf: f64, tf: f64, len: f64, avg_len: f64, p: Bm25Params) -> f64 {
    idf * tf / (tf + p.k1 * (1.0 - p.b + p.b * len / avg_len))
}

/// Sum over query terms (duplicates count) of the BM25 term weight.
pub fn bm25_score(index: &InvertedIndex, q_terms: &[String], ordinal: u32, params: Bm25Params) -> f64 {
    let n = index.num_segments();
    let len = index.segment_len(ordinal) as f64;
    q_terms
        .iter()
        .map(|t| {
            let tf = index.term_freq(t, ordinal);
            if tf == 0 {
                0.0
            } else {
                term_weight(idf(n, index.doc_freq(t)), tf as f64, len, index.avg_len(), params)
            }
        })
        .sum()
}

/// Top-`k` segments by BM25, ties broken by segment id ascending. Only
/// segments with a positive score are returned.
pub fn search(index: &InvertedIndex, topic: &str, k: usize, params: Bm25Params) -> Vec<ScoredSegment> {
    search_terms(index, &analyze(topic), k, params)
}

pub fn search_terms(index: &InvertedIndex, q_terms: &[String], k: usize, params: Bm25Params) -> Vec<ScoredSegment> {
    let n = index.num_segments();
    let mut acc: HashMap<u32, f64> = HashMap::new();
    // term-at-a-time in query order, so each segment's sum is accumulated in
    // the same order as bm25_score
    for t in q_terms {
        let list = index.postings(t);
        if list.is_empty() {
            continue;
        }
        let w_idf = idf(n, list.len());
        for p in list {
            let w = term_weight(w_idf, p.tf as f64, index.segment_len(p.ordinal) as f64, index.avg_len(), params);
            *acc.entry(p.ordinal).or_insert(0.0) += w;
        }
    }
    let mut hits: Vec<(u32, f64)> = acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
    hits.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.segment_id(a.0).cmp(index.segment_id(b.0)))
    });
    hits.truncate(k);
    hits.into_iter()
        .enumerate()
        .map(|(i, (ord, score))| ScoredSegment {
            segment_id: index.segment_id(ord).to_string(),
            score,
            rank: i + 1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::IndexBuilder;

    fn index(docs: &[(&str, &str)]) -> InvertedIndex {
        let mut b = IndexBuilder::new();
        for (id, text) in docs {
            b.add(id, text).unwrap();
        }
        b.build().unwrap()
    }

    fn terms(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn absent_terms_score_zero() {
        let idx = index(&[("a", "cat"), ("b", "dog")]);
        assert_eq!(bm25_score(&idx, &terms(&["fish"]), 0, Bm25Params::default()), 0.0);
        assert!(search(&idx, "fish", 10, Bm25Params::default()).is_empty());
    }

    #[test]
    fn single_doc_hand_evaluation() {
        let idx = index(&[("a", "cat")]);
        let p = Bm25Params::default();
        let expected = (1.0f64 + 0.5 / 1.5).ln() * 1.0 / (1.0 + 0.9);
        let got = bm25_score(&idx, &terms(&["cat"]), 0, p);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn idf_non_negative() {
        for n in 1..50 {
            for df in 0..=n {
                assert!(idf(n, df) >= 0.0);
            }
        }
    }

    #[test]
    fn k_larger_than_corpus_returns_all_positive() {
        let idx = index(&[("a", "cat dog"), ("b", "dog"), ("c", "fish")]);
        let hits = search(&idx, "dog", 100, Bm25Params::default());
        assert_eq!(hits.len(), 2);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn ties_broken_by_id() {
        let idx = index(&[("z", "cat"), ("m", "cat"), ("a", "cat")]);
        let ids: Vec<_> = search(&idx, "cat", 3, Bm25Params::default())
            .into_iter()
            .map(|h| h.segment_id)
            .collect();
        assert_eq!(ids, vec!["a", "m", "z"]);
    }

    #[test]
    fn params_validated() {
        assert!(Bm25Params { k1: -1.0, b: 0.4 }.validate().is_err());
        assert!(Bm25Params { k1: 0.9, b: 1.5 }.validate().is_err());
        assert!(Bm25Params::default().validate().is_ok());
    }
}
