use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    exact_jaccard, lsh_candidate_indices, parse_document_stream, shingle, CorpusError, Document,
    MinHashSignature, MinHasher, ShingleSet,
};

const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub shingle_width: usize,
    pub num_perms: usize,
    pub bands: usize,
    pub rows: usize,
    pub jaccard_threshold: f64,
    pub seed: u64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self {
            shingle_width: 9,
            num_perms: 128,
            bands: 32,
            rows: 4,
            jaccard_threshold: 0.9,
            seed: 0,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.shingle_width == 0 {
            return Err(CorpusError::Config("shingle width must be >= 1".into()));
        }
        if self.num_perms == 0 {
            return Err(CorpusError::Config("num_perms must be >= 1".into()));
        }
        if self.bands * self.rows != self.num_perms {
            return Err(CorpusError::Config(format!(
                "bands ({}) x rows ({}) must equal num_perms ({})",
                self.bands, self.rows, self.num_perms
            )));
        }
        if !(0.0..=1.0).contains(&self.jaccard_threshold) {
            return Err(CorpusError::Config(format!(
                "jaccard threshold {} outside [0, 1]",
                self.jaccard_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceClass {
    pub representative: String,
    /// Sorted ascending; always contains the representative.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub docs_in: usize,
    pub docs_kept: usize,
    pub classes: usize,
    pub reduction_pct: f64,
}

impl DedupReport {
    fn new(docs_in: usize, docs_kept: usize, classes: usize) -> Self {
        let reduction_pct = if docs_in == 0 {
            0.0
        } else {
            100.0 * (docs_in - docs_kept) as f64 / docs_in as f64
        };
        Self {
            docs_in,
            docs_kept,
            classes,
            reduction_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    /// Kept doc ids in input order.
    pub kept: Vec<String>,
    /// Sorted by representative.
    pub classes: Vec<EquivalenceClass>,
    pub report: DedupReport,
}

/// In-memory dedup over a document stream. Shingle sets for every document
/// are retained for the verification stage.
pub fn deduplicate<I>(docs: I, cfg: &DedupConfig) -> Result<DedupOutcome, CorpusError>
where
    I: IntoIterator<Item = Result<Document, CorpusError>>,
{
    cfg.validate()?;
    let hasher = MinHasher::new(cfg.num_perms, cfg.seed);
    let mut ids = Vec::new();
    let mut sets = Vec::new();
    let mut sigs = Vec::new();
    let mut chunk = Vec::with_capacity(CHUNK);
    let mut flush = |chunk: &mut Vec<Document>| {
        let done: Vec<(ShingleSet, MinHashSignature)> = chunk
            .par_iter()
            .map(|d| {
                let s = shingle(&d.doc_id, &d.body, cfg.shingle_width);
                let sig = hasher.signature(&s);
                (s, sig)
            })
            .collect();
        for (d, (s, sig)) in chunk.drain(..).zip(done) {
            ids.push(d.doc_id);
            sets.push(s);
            sigs.push(sig);
        }
    };
    for doc in docs {
        chunk.push(doc?);
        if chunk.len() == CHUNK {
            flush(&mut chunk);
        }
    }
    flush(&mut chunk);
    finalize(ids, &sigs, cfg, |_| Ok(sets))
}

/// Two-pass dedup over a JSONL file: the first pass computes signatures only,
/// the second re-reads the file and shingles just the documents that appear
/// in some LSH candidate pair.
pub fn deduplicate_path(path: &Path, cfg: &DedupConfig) -> Result<DedupOutcome, CorpusError> {
    cfg.validate()?;
    let hasher = MinHasher::new(cfg.num_perms, cfg.seed);
    let mut ids = Vec::new();
    let mut sigs = Vec::new();
    let mut chunk = Vec::with_capacity(CHUNK);
    let open = || -> Result<_, CorpusError> { Ok(parse_document_stream(BufReader::new(File::open(path)?))) };
    let mut flush = |chunk: &mut Vec<Document>| {
        let done: Vec<MinHashSignature> = chunk
            .par_iter()
            .map(|d| hasher.signature(&shingle(&d.doc_id, &d.body, cfg.shingle_width)))
            .collect();
        for (d, sig) in chunk.drain(..).zip(done) {
            ids.push(d.doc_id);
            sigs.push(sig);
        }
    };
    for doc in open()? {
        chunk.push(doc?);
        if chunk.len() == CHUNK {
            flush(&mut chunk);
        }
    }
    flush(&mut chunk);

    finalize(ids, &sigs, cfg, |needed| {
        let mut sets = vec![ShingleSet::default(); sigs.len()];
        for (idx, doc) in open()?.enumerate() {
            let doc = doc?;
            if needed.contains(&idx) {
                sets[idx] = shingle(&doc.doc_id, &doc.body, cfg.shingle_width);
            }
        }
        Ok(sets)
    })
}

fn finalize<F>(
    ids: Vec<String>,
    sigs: &[MinHashSignature],
    cfg: &DedupConfig,
    load_sets: F,
) -> Result<DedupOutcome, CorpusError>
where
    F: FnOnce(&BTreeSet<usize>) -> Result<Vec<ShingleSet>, CorpusError>,
{
    let candidates = lsh_candidate_indices(sigs, cfg.bands, cfg.rows)?;
    let needed: BTreeSet<usize> = candidates.iter().flat_map(|&(i, j)| [i, j]).collect();
    let sets = load_sets(&needed)?;

    let verified: Vec<(usize, usize)> = candidates
        .into_par_iter()
        .filter(|&(i, j)| exact_jaccard(&sets[i], &sets[j]) >= cfg.jaccard_threshold)
        .collect();

    let mut uf = UnionFind::new(ids.len());
    for &(i, j) in &verified {
        uf.union(i, j);
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    let involved: BTreeSet<usize> = verified.iter().flat_map(|&(i, j)| [i, j]).collect();
    for i in involved {
        groups.entry(uf.find(i)).or_default().push(i);
    }

    let mut removed = vec![false; ids.len()];
    let mut classes: BTreeMap<String, EquivalenceClass> = BTreeMap::new();
    for members in groups.into_values() {
        let mut names: Vec<String> = members.iter().map(|&i| ids[i].clone()).collect();
        names.sort();
        let representative = names[0].clone();
        for &i in &members {
            if ids[i] != representative {
                removed[i] = true;
            }
        }
        classes.insert(
            representative.clone(),
            EquivalenceClass {
                representative,
                members: names,
            },
        );
    }

    let kept: Vec<String> = ids
        .into_iter()
        .zip(removed)
        .filter_map(|(id, r)| (!r).then_some(id))
        .collect();
    let report = DedupReport::new(sigs.len(), kept.len(), classes.len());
    Ok(DedupOutcome {
        kept,
        classes: classes.into_values().collect(),
        report,
    })
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, body: &str) -> Result<Document, CorpusError> {
        Ok(Document::new(id, body))
    }

    fn words(seed: usize, n: usize) -> String {
        (0..n).map(|i| format!("w{}x{}", seed, i)).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn no_duplicates_keeps_everything() {
        let docs: Vec<_> = (0..20).map(|i| doc(&format!("d{i:02}"), &words(i, 40))).collect();
        let out = deduplicate(docs, &DedupConfig::default()).unwrap();
        assert_eq!(out.report.docs_in, 20);
        assert_eq!(out.report.docs_kept, 20);
        assert_eq!(out.report.classes, 0);
        assert_eq!(out.report.reduction_pct, 0.0);
    }

    #[test]
    fn identical_pair_keeps_smallest_id() {
        let body = words(1, 50);
        let docs = vec![doc("zeta", &body), doc("other", &words(2, 50)), doc("alpha", &body)];
        let out = deduplicate(docs, &DedupConfig::default()).unwrap();
        assert_eq!(
            out.classes,
            vec![EquivalenceClass {
                representative: "alpha".into(),
                members: vec!["alpha".into(), "zeta".into()]
            }]
        );
        assert_eq!(out.kept, vec!["other".to_string(), "alpha".to_string()]);
        assert_eq!(out.report.docs_kept, 2);
        assert!((out.report.reduction_pct - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn short_docs_collapse_as_identical_empty() {
        // fewer than 9 tokens: empty shingle sets are treated as identical
        let docs = vec![doc("b", "tiny text"), doc("a", "other tiny")];
        let out = deduplicate(docs, &DedupConfig::default()).unwrap();
        assert_eq!(out.kept, vec!["a".to_string()]);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = DedupConfig {
            bands: 10,
            ..Default::default()
        };
        assert!(matches!(deduplicate(Vec::new(), &cfg), Err(CorpusError::Config(_))));
    }

    #[test]
    fn parse_error_propagates() {
        let docs = vec![doc("a", "x"), Err(CorpusError::Malformed { line: 2, reason: "bad".into() })];
        assert!(matches!(
            deduplicate(docs, &DedupConfig::default()),
            Err(CorpusError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn path_variant_matches_in_memory() {
        let mut docs = Vec::new();
        for i in 0..30 {
            docs.push(Document::new(format!("d{i:02}"), words(i % 10, 60)));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        super::super::write_documents(File::create(&path).unwrap(), &docs).unwrap();
        let cfg = DedupConfig::default();
        let a = deduplicate(docs.into_iter().map(Ok), &cfg).unwrap();
        let b = deduplicate_path(&path, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.report.classes, 10);
        assert_eq!(a.report.docs_kept, 10);
    }
}
