use std::io::{BufRead, Write};

use indexmap::IndexMap;

use super::{RetrievalError, ScoredSegment};

/// A TREC run: per-topic ranked lists in file order, plus the run tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrecRun {
    pub tag: String,
    pub topics: IndexMap<String, Vec<ScoredSegment>>,
}

impl TrecRun {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            topics: IndexMap::new(),
        }
    }
}

/// Writes `qid Q0 segment_id rank score tag` lines.
pub fn write_trec_run<W: Write>(mut out: W, run: &TrecRun) -> std::io::Result<()> {
    for (qid, hits) in &run.topics {
        for h in hits {
            writeln!(out, "{} Q0 {} {} {} {}", qid, h.segment_id, h.rank, h.score, run.tag)?;
        }
    }
    Ok(())
}

pub fn read_trec_run<R: BufRead>(reader: R) -> Result<TrecRun, RetrievalError> {
    let mut run = TrecRun::default();
    let mut tag: Option<String> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| RetrievalError::RunFormat { line: line_no, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, q0, seg, rank, score, t] = fields[..] else {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        };
        if q0 != "Q0" && q0 != "0" {
            return Err(bad(format!("second column must be Q0, found {q0:?}")));
        }
        let rank: usize = rank.parse().map_err(|_| bad(format!("bad rank {rank:?}")))?;
        let score: f64 = score.parse().map_err(|_| bad(format!("bad score {score:?}")))?;
        if !score.is_finite() {
            return Err(bad(format!("non-finite score {score}")));
        }
        match &tag {
            None => tag = Some(t.to_string()),
            Some(existing) if existing != t => {
                return Err(bad(format!("run tag {t:?} differs from {existing:?}")));
            }
            _ => {}
        }
        let hits = run.topics.entry(qid.to_string()).or_default();
        if rank != hits.len() + 1 {
            return Err(bad(format!(
                "topic {qid}: expected rank {}, found {rank}",
                hits.len() + 1
            )));
        }
        hits.push(ScoredSegment {
            segment_id: seg.to_string(),
            score,
            rank,
        });
    }
    run.tag = tag.unwrap_or_default();
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hit(id: &str, score: f64, rank: usize) -> ScoredSegment {
        ScoredSegment {
            segment_id: id.into(),
            score,
            rank,
        }
    }

    #[test]
    fn writes_well_formed_lines() {
        let mut run = TrecRun::new("bm25");
        run.topics.insert("q1".into(), vec![hit("d#0", 2.5, 1), hit("d#3", 1.0, 2)]);
        let mut buf = Vec::new();
        write_trec_run(&mut buf, &run).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "q1 Q0 d#0 1 2.5 bm25\nq1 Q0 d#3 2 1 bm25\n"
        );
    }

    #[test]
    fn rank_gap_rejected() {
        let text = "q1 Q0 a 1 2.0 t\nq1 Q0 b 3 1.0 t\n";
        let err = read_trec_run(text.as_bytes()).unwrap_err();
        assert!(matches!(err, RetrievalError::RunFormat { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = read_trec_run("q1 Q0 a 1 2.0 t\nq1 a\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    proptest! {
        #[test]
        fn read_write_identity(
            topics in prop::collection::vec(
                ("[a-z0-9]{1,6}", prop::collection::vec(("[a-z0-9_#]{1,12}", -1e6f64..1e6), 0..8)),
                0..5,
            )
        ) {
            let mut run = TrecRun::new("tag1");
            for (qid, hits) in topics {
                if hits.is_empty() || run.topics.contains_key(&qid) {
                    continue;
                }
                let list = hits.into_iter().enumerate()
                    .map(|(i, (id, s))| hit(&id, s, i + 1)).collect();
                run.topics.insert(qid, list);
            }
            let mut buf = Vec::new();
            write_trec_run(&mut buf, &run).unwrap();
            let back = read_trec_run(buf.as_slice()).unwrap();
            if run.topics.is_empty() {
                prop_assert!(back.topics.is_empty());
            } else {
                prop_assert_eq!(back, run);
            }
        }
    }
}
