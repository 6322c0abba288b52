//! BM25 retrieval over the segment collection and TREC run-file I/O.

mod analyzer;
mod bm25;
mod index;
mod trec;

pub use analyzer::{analyze, ANALYZER_VERSION, STOPWORDS};
pub use bm25::{bm25_score, idf, search, search_terms, Bm25Params, ScoredSegment};
pub use index::{build_index, indexed_text, IndexBuilder, IndexStats, InvertedIndex, Posting, INDEX_FILE, STATS_FILE};
pub use trec::{read_trec_run, write_trec_run, TrecRun};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("empty collection")]
    EmptyCollection,
    #[error("duplicate segment id {0:?}")]
    DuplicateId(String),
    #[error("invalid BM25 parameters: {0}")]
    Params(String),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("run file line {line}: {reason}")]
    RunFormat { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
