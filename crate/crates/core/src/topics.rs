//! Topic collections: loading, the category taxonomy, intrinsic attributes,
//! subset filtering, diversity sampling and distribution reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TopicError {
    #[error("{file} line {line}: {reason}")]
    Malformed { file: String, line: usize, reason: String },
    #[error("topic {0}: attribute out of range: {1}")]
    OutOfRange(String, String),
    #[error("topic {0} has no category label")]
    Unlabeled(String),
    #[error("topic {0} has no attribute vector")]
    MissingAttributes(String),
    #[error("cannot sample {k} topics from a pool of {n}")]
    SampleTooLarge { k: usize, n: usize },
    #[error("unknown topic category {0:?}")]
    UnknownCategory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TopicCategory {
    Simple,
    SimpleWithCondition,
    Set,
    Aggregation,
    Comparison,
    MultiHop,
    FalsePremise,
}

impl TopicCategory {
    pub const ALL: [TopicCategory; 7] = [
        TopicCategory::Simple,
        TopicCategory::SimpleWithCondition,
        TopicCategory::Set,
        TopicCategory::Aggregation,
        TopicCategory::Comparison,
        TopicCategory::MultiHop,
        TopicCategory::FalsePremise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopicCategory::Simple => "Simple",
            TopicCategory::SimpleWithCondition => "SimpleWithCondition",
            TopicCategory::Set => "Set",
            TopicCategory::Aggregation => "Aggregation",
            TopicCategory::Comparison => "Comparison",
            TopicCategory::MultiHop => "MultiHop",
            TopicCategory::FalsePremise => "FalsePremise",
        }
    }
}

impl fmt::Display for TopicCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopicCategory {
    type Err = TopicError;

    /// Accepts the enum names and common spellings such as `simple w/ cond.`,
    /// `Multi-hop` or `false premise`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        Ok(match key.as_str() {
            "simple" => TopicCategory::Simple,
            "simplewithcondition" | "simplewcond" | "simplewcondition" | "simplewithcond" => {
                TopicCategory::SimpleWithCondition
            }
            "set" => TopicCategory::Set,
            "aggregation" => TopicCategory::Aggregation,
            "comparison" => TopicCategory::Comparison,
            "multihop" => TopicCategory::MultiHop,
            "falsepremise" => TopicCategory::FalsePremise,
            _ => return Err(TopicError::UnknownCategory(s.to_string())),
        })
    }
}

pub const ATTRIBUTE_NAMES: [&str; 8] = [
    "ambiguity",
    "incompleteness",
    "assumptive",
    "multi_faceted",
    "knowledge_intensive",
    "subjective",
    "reasoning_intensive",
    "harmful",
];

pub const DEFAULT_LABEL_THRESHOLD: f64 = 5.0;

/// Eight intrinsic-attribute scores on a 0–10 scale, in [`ATTRIBUTE_NAMES`]
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector(pub [f64; 8]);

impl AttributeVector {
    pub fn new(scores: [f64; 8]) -> Result<Self, String> {
        for (name, &v) in ATTRIBUTE_NAMES.iter().zip(&scores) {
            if !(0.0..=10.0).contains(&v) {
                return Err(format!("{name} = {v}"));
            }
        }
        Ok(Self(scores))
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn l1_distance(&self, other: &AttributeVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<TopicCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<AttributeVector>,
}

impl Topic {
    pub fn new(topic_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            topic_id: topic_id.into(),
            text: text.into(),
            category: None,
            attributes: None,
        }
    }
}

/// Parses `topic_id<TAB>text` lines. Blank lines are skipped.
pub fn parse_topics_tsv<R: BufRead>(reader: R, file: &str) -> Result<Vec<Topic>, TopicError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| TopicError::Malformed {
            file: file.to_string(),
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut parts = line.split('\t');
        let (Some(id), Some(text), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected exactly one tab between topic id and text"));
        };
        let (id, text) = (id.trim(), text.trim());
        if id.is_empty() || text.is_empty() {
            return Err(bad("empty topic id or text"));
        }
        if !seen.insert(id.to_string()) {
            return Err(bad(&format!("duplicate topic id {id}")));
        }
        out.push(Topic::new(id, text));
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SidecarRecord {
    topic_id: String,
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    attributes: Option<Vec<f64>>,
}

/// Merges sidecar JSONL records `{topic_id, category?, attributes?}` into
/// `topics`. Returns the number of sidecar ids with no matching topic.
pub fn apply_sidecar<R: BufRead>(topics: &mut [Topic], reader: R, file: &str) -> Result<usize, TopicError> {
    let index: HashMap<String, usize> = topics
        .iter()
        .enumerate()
        .map(|(i, t)| (t.topic_id.clone(), i))
        .collect();
    let mut unknown = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| TopicError::Malformed {
            file: file.to_string(),
            line: i + 1,
            reason,
        };
        let rec: SidecarRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let Some(&pos) = index.get(&rec.topic_id) else {
            log::warn!("{file} line {}: unknown topic id {}", i + 1, rec.topic_id);
            unknown += 1;
            continue;
        };
        if let Some(c) = rec.category {
            topics[pos].category = Some(c.parse().map_err(|e: TopicError| bad(e.to_string()))?);
        }
        if let Some(a) = rec.attributes {
            let arr: [f64; 8] = a
                .try_into()
                .map_err(|v: Vec<f64>| bad(format!("expected 8 attributes, got {}", v.len())))?;
            topics[pos].attributes = Some(
                AttributeVector::new(arr).map_err(|e| TopicError::OutOfRange(rec.topic_id.clone(), e))?,
            );
        }
    }
    Ok(unknown)
}

/// Loads a topics TSV and, when given, its sidecar JSONL.
pub fn load_topics(path: &Path, sidecar: Option<&Path>) -> Result<Vec<Topic>, TopicError> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut topics = parse_topics_tsv(f, &path.display().to_string())?;
    if let Some(sc) = sidecar {
        let f = std::io::BufReader::new(std::fs::File::open(sc)?);
        apply_sidecar(&mut topics, f, &sc.display().to_string())?;
    }
    Ok(topics)
}

/// Names of attributes scoring at least `threshold`.
pub fn attribute_labels(v: &AttributeVector, threshold: f64) -> BTreeSet<&'static str> {
    ATTRIBUTE_NAMES
        .iter()
        .zip(&v.0)
        .filter(|(_, &s)| s >= threshold)
        .map(|(n, _)| *n)
        .collect()
}

/// Categories kept by default: topics needing long-form or aggregated
/// answers.
pub const DEFAULT_KEEP: [TopicCategory; 5] = [
    TopicCategory::Aggregation,
    TopicCategory::SimpleWithCondition,
    TopicCategory::Set,
    TopicCategory::Comparison,
    TopicCategory::MultiHop,
];

/// Keeps topics whose category is in `keep`, preserving order.
pub fn filter_by_category(topics: &[Topic], keep: &BTreeSet<TopicCategory>) -> Result<Vec<Topic>, TopicError> {
    let mut out = Vec::new();
    for t in topics {
        let c = t.category.ok_or_else(|| TopicError::Unlabeled(t.topic_id.clone()))?;
        if keep.contains(&c) {
            out.push(t.clone());
        }
    }
    Ok(out)
}

/// Farthest-point traversal under l1 distance. The first pick is the topic
/// with the largest l1 norm; each later pick maximises its minimum distance
/// to those already chosen. Ties go to the smaller topic id.
pub fn diversity_sample(pool: &[Topic], k: usize) -> Result<Vec<Topic>, TopicError> {
    if k > pool.len() {
        return Err(TopicError::SampleTooLarge { k, n: pool.len() });
    }
    let vecs: Vec<AttributeVector> = pool
        .iter()
        .map(|t| t.attributes.ok_or_else(|| TopicError::MissingAttributes(t.topic_id.clone())))
        .collect::<Result<_, _>>()?;
    let better = |score: f64, i: usize, best: Option<(f64, usize)>| match best {
        None => true,
        Some((bs, bi)) => score > bs || (score == bs && pool[i].topic_id < pool[bi].topic_id),
    };
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; pool.len()];
    // min distance from each candidate to the chosen set
    let mut min_dist = vec![f64::INFINITY; pool.len()];
    for step in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for i in (0..pool.len()).filter(|&i| !taken[i]) {
            let score = if step == 0 { vecs[i].l1_norm() } else { min_dist[i] };
            if better(score, i, best) {
                best = Some((score, i));
            }
        }
        let (_, pick) = best.expect("k <= pool size");
        taken[pick] = true;
        chosen.push(pool[pick].clone());
        for i in 0..pool.len() {
            min_dist[i] = min_dist[i].min(vecs[i].l1_distance(&vecs[pick]));
        }
    }
    Ok(chosen)
}

/// Percentages with one decimal, rounded by largest remainder so a
/// histogram over a partition sums to exactly 100.0.
fn percentages(counts: &BTreeMap<String, usize>, total: usize) -> BTreeMap<String, f64> {
    if total == 0 {
        return BTreeMap::new();
    }
    // work in tenths of a percent
    let mut floors: Vec<(String, u64, f64)> = counts
        .iter()
        .map(|(k, &c)| {
            let exact = c as f64 * 1000.0 / total as f64;
            (k.clone(), exact.floor() as u64, exact - exact.floor())
        })
        .collect();
    let assigned: u64 = floors.iter().map(|f| f.1).sum();
    let mut order: Vec<usize> = (0..floors.len()).collect();
    order.sort_by(|&a, &b| floors[b].2.total_cmp(&floors[a].2).then(floors[a].0.cmp(&floors[b].0)));
    for &i in order.iter().take(1000usize.saturating_sub(assigned as usize)) {
        floors[i].1 += 1;
    }
    floors.into_iter().map(|(k, t, _)| (k, t as f64 / 10.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStats {
    pub topics: usize,
    /// Share of labelled topics per category.
    pub categories: BTreeMap<String, f64>,
    /// Share of topics per lowercased first word.
    pub first_words: BTreeMap<String, f64>,
    /// Share of topics with attributes carrying each label. A topic can carry
    /// several labels, so this does not sum to 100.
    pub attribute_labels: BTreeMap<String, f64>,
}

pub fn report_stats(topics: &[Topic]) -> TopicStats {
    report_stats_with_threshold(topics, DEFAULT_LABEL_THRESHOLD)
}

pub fn report_stats_with_threshold(topics: &[Topic], threshold: f64) -> TopicStats {
    let mut cats = BTreeMap::new();
    let mut words = BTreeMap::new();
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    let mut labelled = 0;
    let mut with_attrs = 0;
    for t in topics {
        if let Some(c) = t.category {
            *cats.entry(c.name().to_string()).or_insert(0) += 1;
            labelled += 1;
        }
        if let Some(w) = t.text.split_whitespace().next() {
            *words.entry(w.to_lowercase()).or_insert(0) += 1;
        }
        if let Some(a) = &t.attributes {
            with_attrs += 1;
            for l in attribute_labels(a, threshold) {
                *labels.entry(l.to_string()).or_insert(0) += 1;
            }
        }
    }
    let with_words: usize = words.values().sum();
    TopicStats {
        topics: topics.len(),
        categories: percentages(&cats, labelled),
        first_words: percentages(&words, with_words),
        attribute_labels: labels
            .into_iter()
            .map(|(k, c)| (k, (c as f64 * 1000.0 / with_attrs as f64).round() / 10.0))
            .collect(),
    }
}
