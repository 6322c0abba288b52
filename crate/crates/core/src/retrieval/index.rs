//! Inverted index and its on-disk form.
//!
//! `index.bin` layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "RGKIDX01"
//! n_segments   u32
//! per segment: id_len u32, id bytes (utf-8), length u32 (tokens)
//! n_terms      u32
//! per term (ascending byte order):
//!              term_len u32, term bytes (utf-8), n_postings u32,
//!              n_postings x (ordinal u32, tf u32)
//! ```
//!
//! `stats.json` carries the collection statistics and is checked on load.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{analyze, RetrievalError, ANALYZER_VERSION};
use crate::corpus::Segment;

const MAGIC: &[u8; 8] = b"RGKIDX01";
pub const INDEX_FILE: &str = "index.bin";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub format: String,
    pub analyzer: String,
    pub num_segments: usize,
    pub num_terms: usize,
    pub num_postings: usize,
    pub avg_len: f64,
}

/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    ids: Vec<String>,
    lengths: Vec<u32>,
    postings: HashMap<String, Vec<Posting>>,
    lookup: HashMap<String, u32>,
    avg_len: f64,
}

/// Accumulates segments in ordinal order.
#[derive(Debug, Default)]
pub struct IndexBuilder {
    ids: Vec<String>,
    lengths: Vec<u32>,
    postings: HashMap<String, Vec<Posting>>,
    lookup: HashMap<String, u32>,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, id: &str, text: &str) -> Result<(), RetrievalError> {
        if self.lookup.contains_key(id) {
            return Err(RetrievalError::DuplicateId(id.to_string()));
        }
        let ordinal = self.ids.len() as u32;
        let terms = analyze(text);
        let mut tfs: BTreeMap<String, u32> = BTreeMap::new();
        for t in &terms {
            *tfs.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in tfs {
            self.postings.entry(term).or_default().push(Posting { ordinal, tf });
        }
        self.lengths.push(terms.len() as u32);
        self.lookup.insert(id.to_string(), ordinal);
        self.ids.push(id.to_string());
        Ok(())
    }

    pub fn build(self) -> Result<InvertedIndex, RetrievalError> {
        if self.ids.is_empty() {
            return Err(RetrievalError::EmptyCollection);
        }
        let total: u64 = self.lengths.iter().map(|&l| l as u64).sum();
        let avg_len = total as f64 / self.ids.len() as f64;
        Ok(InvertedIndex {
            ids: self.ids,
            lengths: self.lengths,
            postings: self.postings,
            lookup: self.lookup,
            avg_len,
        })
    }
}

/// Text indexed for a segment: title followed by the segment body.
pub fn indexed_text(seg: &Segment) -> String {
    if seg.title.is_empty() {
        seg.text.clone()
    } else {
        format!("{}\n{}", seg.title, seg.text)
    }
}

pub fn build_index<'a>(segments: impl IntoIterator<Item = &'a Segment>) -> Result<InvertedIndex, RetrievalError> {
    let mut b = IndexBuilder::new();
    for seg in segments {
        b.add(&seg.segment_id, &indexed_text(seg))?;
    }
    b.build()
}

impl InvertedIndex {
    pub fn num_segments(&self) -> usize {
        self.ids.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn segment_id(&self, ordinal: u32) -> &str {
        &self.ids[ordinal as usize]
    }

    pub fn ordinal(&self, segment_id: &str) -> Option<u32> {
        self.lookup.get(segment_id).copied()
    }

    pub fn segment_len(&self, ordinal: u32) -> u32 {
        self.lengths[ordinal as usize]
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn term_freq(&self, term: &str, ordinal: u32) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&ordinal, |p| p.ordinal)
            .map(|i| list[i].tf)
            .unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            format: String::from_utf8_lossy(MAGIC).into_owned(),
            analyzer: ANALYZER_VERSION.to_string(),
            num_segments: self.ids.len(),
            num_terms: self.postings.len(),
            num_postings: self.postings.values().map(Vec::len).sum(),
            avg_len: self.avg_len,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), RetrievalError> {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(INDEX_FILE))?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(self.ids.len() as u32)?;
        for (id, &len) in self.ids.iter().zip(&self.lengths) {
            write_str(&mut w, id)?;
            w.write_u32::<LittleEndian>(len)?;
        }
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort();
        w.write_u32::<LittleEndian>(terms.len() as u32)?;
        for term in terms {
            write_str(&mut w, term)?;
            let list = &self.postings[term];
            w.write_u32::<LittleEndian>(list.len() as u32)?;
            for p in list {
                w.write_u32::<LittleEndian>(p.ordinal)?;
                w.write_u32::<LittleEndian>(p.tf)?;
            }
        }
        w.flush()?;
        let stats = serde_json::to_string_pretty(&self.stats()).expect("stats serialize");
        std::fs::write(dir.join(STATS_FILE), stats + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, RetrievalError> {
        let corrupt = |m: String| RetrievalError::Corrupt(m);
        let mut r = BufReader::new(File::open(dir.join(INDEX_FILE))?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut ids = Vec::with_capacity(n);
        let mut lengths = Vec::with_capacity(n);
        let mut lookup = HashMap::with_capacity(n);
        for ord in 0..n {
            let id = read_str(&mut r)?;
            lengths.push(r.read_u32::<LittleEndian>()?);
            if lookup.insert(id.clone(), ord as u32).is_some() {
                return Err(RetrievalError::DuplicateId(id));
            }
            ids.push(id);
        }
        let n_terms = r.read_u32::<LittleEndian>()? as usize;
        let mut postings = HashMap::with_capacity(n_terms);
        for _ in 0..n_terms {
            let term = read_str(&mut r)?;
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let ordinal = r.read_u32::<LittleEndian>()?;
                let tf = r.read_u32::<LittleEndian>()?;
                if ordinal as usize >= n {
                    return Err(corrupt(format!("posting ordinal {ordinal} out of range")));
                }
                list.push(Posting { ordinal, tf });
            }
            if list.windows(2).any(|w| w[0].ordinal >= w[1].ordinal) {
                return Err(corrupt(format!("postings for {term:?} not sorted")));
            }
            postings.insert(term, list);
        }
        if n == 0 {
            return Err(RetrievalError::EmptyCollection);
        }
        let total: u64 = lengths.iter().map(|&l| l as u64).sum();
        let index = InvertedIndex {
            avg_len: total as f64 / n as f64,
            ids,
            lengths,
            postings,
            lookup,
        };
        let stats_path = dir.join(STATS_FILE);
        if stats_path.exists() {
            let stored: IndexStats = serde_json::from_str(&std::fs::read_to_string(stats_path)?)
                .map_err(|e| corrupt(format!("stats.json: {e}")))?;
            if stored != index.stats() {
                return Err(corrupt("stats.json does not match index.bin".into()));
            }
        }
        Ok(index)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, RetrievalError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| RetrievalError::Corrupt(e.to_string()))
}
