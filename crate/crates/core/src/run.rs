//! Ranked runs and the TREC run file format.
//!
//! A run line is `query_id Q0 doc_id rank score tag`, space separated,
//! ranks starting at 1.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("query `{query_id}` lists document `{doc_id}` more than once")]
    DuplicateDocument { query_id: String, doc_id: String },
    #[error("query `{query_id}`: scores increase at position {position}")]
    NotDescending { query_id: String, position: usize },
    #[error("query `{query_id}`: non-finite score for `{doc_id}`")]
    NonFiniteScore { query_id: String, doc_id: String },
    #[error("query `{query_id}`: rank {rank} listed twice")]
    DuplicateRank { query_id: String, rank: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Self { doc_id: doc_id.into(), score }
    }
}

/// Sort descending by score, ties by ascending doc id.
pub fn sort_ranking(list: &mut [ScoredDoc]) {
    list.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
}

/// Per-query ranked lists, keyed (and iterated) by query id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Run {
    rankings: BTreeMap<String, Vec<ScoredDoc>>,
}

impl Run {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, ranking: Vec<ScoredDoc>) {
        self.rankings.insert(query_id.into(), ranking);
    }

    pub fn get(&self, query_id: &str) -> Option<&[ScoredDoc]> {
        self.rankings.get(query_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ScoredDoc])> {
        self.rankings.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    /// Add an empty ranking for every listed query that has none, so that
    /// queries with nothing retrieved still count during evaluation.
    pub fn ensure_queries<'a, I: IntoIterator<Item = &'a str>>(&mut self, query_ids: I) {
        for q in query_ids {
            self.rankings.entry(q.to_string()).or_default();
        }
    }

    /// Check list invariants: unique documents, finite non-increasing scores.
    pub fn validate(&self) -> Result<(), RunError> {
        for (q, list) in &self.rankings {
            let mut seen = HashSet::with_capacity(list.len());
            for (i, entry) in list.iter().enumerate() {
                if !entry.score.is_finite() {
                    return Err(RunError::NonFiniteScore { query_id: q.clone(), doc_id: entry.doc_id.clone() });
                }
                if !seen.insert(entry.doc_id.as_str()) {
                    return Err(RunError::DuplicateDocument { query_id: q.clone(), doc_id: entry.doc_id.clone() });
                }
                if i > 0 && entry.score > list[i - 1].score {
                    return Err(RunError::NotDescending { query_id: q.clone(), position: i + 1 });
                }
            }
        }
        Ok(())
    }

    pub fn write_trec<W: Write>(&self, mut out: W, tag: &str) -> Result<(), RunError> {
        for (q, list) in &self.rankings {
            for (i, entry) in list.iter().enumerate() {
                writeln!(out, "{} Q0 {} {} {:.9e} {}", q, entry.doc_id, i + 1, entry.score, tag)?;
            }
        }
        Ok(())
    }

    /// Parse a TREC run. Lines of a query may appear in any order; each
    /// query's list is ordered by the rank column.
    pub fn read_trec<R: BufRead>(reader: R) -> Result<Self, RunError> {
        let mut raw: BTreeMap<String, Vec<(usize, ScoredDoc)>> = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 6 {
                return Err(RunError::Parse {
                    line: line_no,
                    message: format!("expected 6 columns, found {}", parts.len()),
                });
            }
            let parse_err = |message: String| RunError::Parse { line: line_no, message };
            let rank: usize = parts[3].parse().map_err(|e| parse_err(format!("bad rank `{}`: {e}", parts[3])))?;
            let score: f64 = parts[4].parse().map_err(|e| parse_err(format!("bad score `{}`: {e}", parts[4])))?;
            raw.entry(parts[0].to_string())
                .or_default()
                .push((rank, ScoredDoc::new(parts[2], score)));
        }
        let mut run = Run::new();
        for (q, mut entries) in raw {
            entries.sort_by_key(|(rank, _)| *rank);
            if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(RunError::DuplicateRank { query_id: q, rank: w[0].0 });
            }
            run.insert(q, entries.into_iter().map(|(_, d)| d).collect());
        }
        run.validate()?;
        Ok(run)
    }
}

impl FromIterator<(String, Vec<ScoredDoc>)> for Run {
    fn from_iter<I: IntoIterator<Item = (String, Vec<ScoredDoc>)>>(iter: I) -> Self {
        Self { rankings: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Run {
        let mut run = Run::new();
        run.insert("q2", vec![ScoredDoc::new("d1", 0.5)]);
        run.insert("q1", vec![ScoredDoc::new("d3", 2.0), ScoredDoc::new("d1", 1.25), ScoredDoc::new("d2", 1.25)]);
        run
    }

    #[test]
    fn trec_round_trip() {
        let run = sample();
        let mut buf = Vec::new();
        run.write_trec(&mut buf, "bm25").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("q1 Q0 d3 1 2.000000000e0 bm25\n"));
        assert_eq!(Run::read_trec(buf.as_slice()).unwrap(), run);
    }

    #[test]
    fn reader_orders_by_rank_column() {
        let text = "q1 Q0 b 2 1.0 t\nq1 Q0 a 1 3.0 t\n";
        let run = Run::read_trec(text.as_bytes()).unwrap();
        let ids: Vec<_> = run.get("q1").unwrap().iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn reader_rejects_malformed_runs() {
        assert!(matches!(Run::read_trec("q1 Q0 a 1\n".as_bytes()), Err(RunError::Parse { line: 1, .. })));
        assert!(matches!(
            Run::read_trec("q1 Q0 a 1 1.0 t\nq1 Q0 a 2 0.5 t\n".as_bytes()),
            Err(RunError::DuplicateDocument { .. })
        ));
        assert!(matches!(
            Run::read_trec("q1 Q0 a 1 1.0 t\nq1 Q0 b 2 1.5 t\n".as_bytes()),
            Err(RunError::NotDescending { position: 2, .. })
        ));
    }

    #[test]
    fn sort_breaks_ties_by_doc_id() {
        let mut list = vec![ScoredDoc::new("b", 1.0), ScoredDoc::new("a", 1.0), ScoredDoc::new("c", 2.0)];
        sort_ranking(&mut list);
        let ids: Vec<_> = list.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }
}
