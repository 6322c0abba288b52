//! Document ingestion, near-duplicate removal, and sliding-window segmentation.

mod dedup;
mod document;
mod minhash;
mod segment;
mod sentences;
mod shingle;
mod store;

pub use dedup::{deduplicate, deduplicate_path, DedupConfig, DedupOutcome, DedupReport, EquivalenceClass};
pub use document::{parse_document_stream, write_documents, Document, DocumentStream};
pub use minhash::{
    estimate_jaccard, lsh_candidate_indices, lsh_candidate_pairs, minhash_signature, MinHashSignature,
    MinHasher,
};
pub use segment::{
    format_segment_id, parse_segment_id, segment_document, window_ranges, write_segments, Segment,
    SegmentConfig,
};
pub use sentences::{
    char_slice, sentence_byte_spans, split_sentences, CharIndex, ABBREVIATIONS, SPLITTER_VERSION,
};
pub use shingle::{exact_jaccard, fingerprint, shingle, ShingleSet};
pub use store::SegmentStore;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: malformed document: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate docid {doc_id:?}")]
    DuplicateDocId { line: usize, doc_id: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
