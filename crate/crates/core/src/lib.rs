//! Two-stage retrieval-augmented generation toolkit.
//!
//! Retrieval (BM25 over a deduplicated, segmented corpus, followed by
//! listwise reranking) feeds augmented generation with sentence-level
//! citations. The output of every run is a [`ragio::RagResponse`].

pub mod corpus;
pub mod retrieval;
pub mod backend;
pub mod ragio;
pub mod rerank;
pub mod generation;
pub mod topics;
pub mod pipeline;

#[cfg(test)]
pub(crate) mod testutil;
