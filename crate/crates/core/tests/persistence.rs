use proptest::prelude::*;
use ragkit_core::corpus::{segment_document, write_segments, Document, SegmentConfig, SegmentStore};
use ragkit_core::retrieval::{build_index, search, Bm25Params, InvertedIndex};

const WORDS: &[&str] = &["alpha", "beta", "gamma", "delta", "kiwi", "mango", "river", "stone", "cloud", "ember"];

fn body(picks: &[Vec<usize>]) -> String {
    picks
        .iter()
        .map(|s| {
            let mut t = s.iter().map(|&i| WORDS[i]).collect::<Vec<_>>().join(" ");
            t.push('.');
            t
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn sentences() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0..WORDS.len(), 1..8), 1..15)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn saved_index_searches_the_same(docs in prop::collection::vec(sentences(), 1..12), q in prop::collection::vec(0..WORDS.len(), 1..4)) {
        let segs: Vec<_> = docs
            .iter()
            .enumerate()
            .flat_map(|(i, d)| segment_document(&Document::new(format!("d{i}"), body(d)), SegmentConfig::default()).unwrap())
            .collect();
        let index = build_index(&segs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        index.save(dir.path()).unwrap();
        let loaded = InvertedIndex::load(dir.path()).unwrap();
        prop_assert_eq!(&loaded, &index);

        let query = q.iter().map(|&i| WORDS[i]).collect::<Vec<_>>().join(" ");
        prop_assert_eq!(search(&loaded, &query, 50, Bm25Params::default()), search(&index, &query, 50, Bm25Params::default()));

        let path = dir.path().join("segments.jsonl");
        let mut buf = Vec::new();
        write_segments(&mut buf, &segs).unwrap();
        std::fs::write(&path, buf).unwrap();
        let store = SegmentStore::open(&path).unwrap();
        prop_assert_eq!(store.len(), segs.len());
        for s in &segs {
            prop_assert_eq!(store.get(&s.segment_id), Some(s));
        }
    }
}

#[test]
fn loading_a_missing_index_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(InvertedIndex::load(&dir.path().join("nope")).is_err());
}
