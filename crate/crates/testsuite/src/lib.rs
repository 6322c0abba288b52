//! Seeded synthetic data for the acceptance suite: corpora with planted
//! near-duplicates, documents with known sentence boundaries, toy BM25
//! collections, and a topic set with a matching segment collection.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ragkit_core::corpus::{segment_document, Document, Segment, SegmentConfig, ABBREVIATIONS};
use ragkit_core::topics::Topic;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const ONSETS: &[&str] = &["b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "v", "z", "st", "tr", "pl"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "é", "ü", "ai"];

/// A lowercase pseudo-word of two to four syllables. Never an abbreviation
/// on the sentence splitter's allowlist.
pub fn word(rng: &mut impl Rng) -> String {
    loop {
        let n = rng.gen_range(1..=3);
        let mut w = String::new();
        for _ in 0..n {
            w.push_str(ONSETS.choose(rng).unwrap());
            w.push_str(VOWELS.choose(rng).unwrap());
        }
        if rng.gen_bool(0.3) {
            w.push_str(ONSETS.choose(rng).unwrap());
        }
        if w.chars().count() >= 2 && !ABBREVIATIONS.contains(&w.as_str()) {
            return w;
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// A corpus plus the near-duplicate clusters planted in it.
pub struct PlantedCorpus {
    pub docs: Vec<Document>,
    /// Member ids of each planted cluster, sorted.
    pub clusters: Vec<Vec<String>>,
}

/// `n_docs` documents of `doc_words` random tokens. `n_clusters` of them are
/// bases with `cluster_size - 1` variants, each differing from the base in
/// one token at a position of its own. The rest are independent.
pub fn planted_corpus(seed: u64, n_docs: usize, n_clusters: usize, cluster_size: usize, doc_words: usize) -> PlantedCorpus {
    assert!(n_clusters * cluster_size <= n_docs);
    let mut rng = rng(seed);
    let fresh = |rng: &mut ChaCha8Rng| -> Vec<String> { (0..doc_words).map(|_| format!("w{}", rng.gen_range(0..200_000))).collect() };
    let mut bodies: Vec<(Vec<String>, Option<usize>)> = Vec::with_capacity(n_docs);
    for c in 0..n_clusters {
        let base = fresh(&mut rng);
        for v in 0..cluster_size {
            let mut body = base.clone();
            if v > 0 {
                let pos = (doc_words / (cluster_size + 1)) * v;
                body[pos] = format!("x{}", rng.gen_range(0..1_000_000));
            }
            bodies.push((body, Some(c)));
        }
    }
    while bodies.len() < n_docs {
        bodies.push((fresh(&mut rng), None));
    }
    bodies.shuffle(&mut rng);
    let mut clusters = vec![Vec::new(); n_clusters];
    let docs = bodies
        .into_iter()
        .enumerate()
        .map(|(i, (body, cluster))| {
            let id = format!("doc{i:05}");
            if let Some(c) = cluster {
                clusters[c].push(id.clone());
            }
            Document::new(id, body.join(" "))
        })
        .collect();
    for c in &mut clusters {
        c.sort();
    }
    PlantedCorpus { docs, clusters }
}

/// A document with the char offsets of every sentence it was built from.
pub struct SentenceDoc {
    pub doc: Document,
    pub sentences: Vec<(usize, usize)>,
}

/// Joins `n` generated sentences with assorted whitespace.
pub fn sentence_doc(rng: &mut impl Rng, doc_id: &str, n: usize) -> SentenceDoc {
    let mut body = String::new();
    if rng.gen_bool(0.2) {
        body.push_str("  ");
    }
    let mut sentences = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            body.push_str([" ", "  ", "\n", " \n\n"].choose(rng).unwrap());
        }
        let k = rng.gen_range(2..=12);
        let mut s = capitalize(&word(rng));
        for _ in 1..k {
            s.push(' ');
            s.push_str(&word(rng));
        }
        s.push(*['.', '?', '!'].choose(rng).unwrap());
        let start = body.chars().count();
        body.push_str(&s);
        sentences.push((start, start + s.chars().count()));
    }
    let mut doc = Document::new(doc_id, body);
    doc.title = format!("Title of {doc_id}");
    doc.url = format!("https://example.org/{doc_id}");
    SentenceDoc { doc, sentences }
}

pub const TOY_VOCAB: &[&str] = &[
    "river", "mountain", "forest", "desert", "ocean", "island", "valley", "glacier", "volcano", "canyon", "meadow",
    "harbor", "bridge", "castle", "temple", "market", "garden", "library", "museum", "stadium", "railway",
    "airport", "factory", "village", "harvest", "festival", "painting", "sculpture", "symphony", "novel",
    "theorem", "galaxy", "molecule", "protein", "vaccine", "battery", "engine", "satellite", "telescope", "compass",
];

/// `(segment_id, text)` pairs over a small vocabulary so document
/// frequencies vary widely. About one in ten texts repeats an earlier one,
/// which produces exact score ties.
pub fn toy_collection(rng: &mut impl Rng, n: usize) -> Vec<(String, String)> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let mut out: Vec<(String, String)> = Vec::with_capacity(n);
    for id in ids {
        let text = if !out.is_empty() && rng.gen_bool(0.1) {
            out[rng.gen_range(0..out.len())].1.clone()
        } else {
            let len = rng.gen_range(1..=40);
            (0..len).map(|_| *TOY_VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
        };
        out.push((format!("seg{id:04}"), text));
    }
    out
}

pub fn toy_query(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(1..=5);
    let mut q: Vec<&str> = (0..len).map(|_| *TOY_VOCAB.choose(rng).unwrap()).collect();
    if rng.gen_bool(0.2) {
        q.push("unindexed");
    }
    q.join(" ")
}

/// A segment collection and a topic set over it. Every document carries a
/// unique marker token, so topics made only of markers retrieve a handful
/// of segments; some topics match nothing at all.
pub struct DevSet {
    pub segments: Vec<Segment>,
    pub topics: Vec<Topic>,
}

pub fn dev_set(seed: u64, n_docs: usize, n_topics: usize) -> DevSet {
    let mut rng = rng(seed);
    let mut segments = Vec::new();
    let mut markers = Vec::new();
    for d in 0..n_docs {
        let marker = format!("mk{d}q");
        let n = rng.gen_range(1..=25);
        let mut body = String::new();
        for i in 0..n {
            if i > 0 {
                body.push(' ');
            }
            let k = rng.gen_range(4..=10);
            let mut s: Vec<String> = (0..k).map(|_| TOY_VOCAB.choose(&mut rng).unwrap().to_string()).collect();
            if rng.gen_bool(0.3) {
                s.push(marker.clone());
            }
            let mut text = capitalize(&s.join(" "));
            text.push('.');
            body.push_str(&text);
        }
        let mut doc = Document::new(format!("dev{d:03}"), body);
        doc.title = format!("{} {}", TOY_VOCAB.choose(&mut rng).unwrap(), marker);
        doc.url = format!("https://example.org/dev/{d}");
        segments.extend(segment_document(&doc, SegmentConfig::default()).expect("segment"));
        markers.push(marker);
    }
    let topics = (0..n_topics)
        .map(|i| {
            let text = match i % 8 {
                // nothing in the collection
                0 => format!("zzunknown{i} qqabsent"),
                // a single document
                1 | 2 => format!("what is {}", markers[rng.gen_range(0..markers.len())]),
                _ => {
                    let k = rng.gen_range(1..=4);
                    let terms: Vec<&str> = (0..k).map(|_| *TOY_VOCAB.choose(&mut rng).unwrap()).collect();
                    format!("how does the {} relate", terms.join(" "))
                }
            };
            Topic::new(format!("dev-{i:03}"), text)
        })
        .collect();
    DevSet { segments, topics }
}
