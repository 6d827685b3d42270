//! Second-stage re-ordering of candidate list heads.
//!
//! The first `depth` entries of each list are re-scored with a
//! [`PairScorer`] and sorted by that score. Entries past the head keep
//! their relative order and are given scores just below the head minimum
//! so the output stays a valid non-increasing run.

use std::collections::HashMap;
use std::collections::hash_map::Entry;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::run::{Run, ScoredDoc};
use crate::textproc::{analyze, AnalyzerConfig};

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("no score for query `{query_id}`, document `{doc_id}`")]
    MissingScore { query_id: String, doc_id: String },
    #[error("{path}: line {line}: {message}")]
    ParseError { path: PathBuf, line: usize, message: String },
    #[error("{path}: line {line}: pair (`{query_id}`, `{doc_id}`) listed twice")]
    DuplicatePair { path: PathBuf, line: usize, query_id: String, doc_id: String },
    #[error("re-ranking depth must be at least 1")]
    InvalidDepth,
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

type Result<T> = std::result::Result<T, RerankError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Entries past the head keep their first-stage order.
    #[default]
    Preserve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankConfig {
    pub depth: usize,
    #[serde(default)]
    pub tail_policy: TailPolicy,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self { depth: 10, tail_policy: TailPolicy::Preserve }
    }
}

/// Scores a (query, document) pair. Higher is more relevant.
pub trait PairScorer {
    fn score(&self, query_id: &str, doc_id: &str) -> Option<f64>;
}

impl<F: Fn(&str, &str) -> Option<f64>> PairScorer for F {
    fn score(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        self(query_id, doc_id)
    }
}

/// Pre-computed pair scores, typically produced by an external cross-encoder.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: HashMap<(String, String), f64>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        self.scores.get(&(query_id.to_string(), doc_id.to_string())).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.scores.iter().map(|((q, d), s)| (q.as_str(), d.as_str(), *s))
    }

    /// Parse `query_id<TAB>doc_id<TAB>score` lines. `path` is used in
    /// error messages only.
    pub fn read<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut table = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| RerankError::Io { path: path.to_path_buf(), source })?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| RerankError::ParseError { path: path.to_path_buf(), line: line_no, message };
            let cols: Vec<&str> = line.split('\t').collect();
            let [q, d, s] = cols[..] else {
                return Err(parse_err(format!("expected 3 tab-separated columns, found {}", cols.len())));
            };
            if q.is_empty() || d.is_empty() {
                return Err(parse_err("empty query or document id".into()));
            }
            let score: f64 = s.trim().parse().map_err(|e| parse_err(format!("bad score `{s}`: {e}")))?;
            if !score.is_finite() {
                return Err(parse_err(format!("non-finite score `{s}`")));
            }
            match table.scores.entry((q.to_string(), d.to_string())) {
                Entry::Occupied(_) => {
                    return Err(RerankError::DuplicatePair {
                        path: path.to_path_buf(),
                        line: line_no,
                        query_id: q.to_string(),
                        doc_id: d.to_string(),
                    })
                }
                Entry::Vacant(v) => {
                    v.insert(score);
                }
            }
        }
        Ok(table)
    }
}

impl PairScorer for ScoreTable {
    fn score(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        self.get(query_id, doc_id)
    }
}

pub fn load_scores(path: &Path) -> Result<ScoreTable> {
    let file = std::fs::File::open(path).map_err(|source| RerankError::Io { path: path.to_path_buf(), source })?;
    ScoreTable::read(std::io::BufReader::new(file), path)
}

/// Jaccard similarity of the two token sets; 0 when both are empty.
pub fn overlap_score(query_text: &str, doc_text: &str, analyzer: &AnalyzerConfig) -> f64 {
    let q: std::collections::BTreeSet<String> = analyze(query_text, analyzer).into_inner().into_iter().collect();
    let d: std::collections::BTreeSet<String> = analyze(doc_text, analyzer).into_inner().into_iter().collect();
    let union = q.union(&d).count();
    if union == 0 {
        return 0.0;
    }
    q.intersection(&d).count() as f64 / union as f64
}

/// Token-overlap scorer over known query and document texts.
#[derive(Debug, Clone)]
pub struct OverlapScorer {
    queries: HashMap<String, std::collections::BTreeSet<String>>,
    docs: HashMap<String, std::collections::BTreeSet<String>>,
}

impl OverlapScorer {
    pub fn new<'a, Q, D>(queries: Q, docs: D, analyzer: &AnalyzerConfig) -> Self
    where
        Q: IntoIterator<Item = (&'a str, &'a str)>,
        D: IntoIterator<Item = (&'a str, String)>,
    {
        let set = |t: &str| analyze(t, analyzer).into_inner().into_iter().collect();
        Self {
            queries: queries.into_iter().map(|(id, t)| (id.to_string(), set(t))).collect(),
            docs: docs.into_iter().map(|(id, t)| (id.to_string(), set(&t))).collect(),
        }
    }
}

impl PairScorer for OverlapScorer {
    fn score(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        let q = self.queries.get(query_id)?;
        let d = self.docs.get(doc_id)?;
        let union = q.union(d).count();
        Some(if union == 0 { 0.0 } else { q.intersection(d).count() as f64 / union as f64 })
    }
}

/// Re-rank one list. The head is sorted by scorer score, ties by prior
/// position, then doc id.
pub fn rerank_list<S: PairScorer + ?Sized>(
    query_id: &str,
    list: &[ScoredDoc],
    scorer: &S,
    config: &RerankConfig,
) -> Result<Vec<ScoredDoc>> {
    if config.depth == 0 {
        return Err(RerankError::InvalidDepth);
    }
    let k = config.depth.min(list.len());
    let mut head = list[..k]
        .iter()
        .enumerate()
        .map(|(pos, d)| {
            scorer
                .score(query_id, &d.doc_id)
                .filter(|s| s.is_finite())
                .map(|s| (pos, ScoredDoc::new(d.doc_id.clone(), s)))
                .ok_or_else(|| RerankError::MissingScore { query_id: query_id.to_string(), doc_id: d.doc_id.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    head.sort_by(|(pa, a), (pb, b)| {
        b.score.total_cmp(&a.score).then(pa.cmp(pb)).then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    let mut out: Vec<ScoredDoc> = head.into_iter().map(|(_, d)| d).collect();
    if let Some(min) = out.last().map(|d| d.score) {
        let eps = min.abs().max(1.0) * 1e-6;
        for (i, d) in list[k..].iter().enumerate() {
            out.push(ScoredDoc::new(d.doc_id.clone(), min - eps * (i + 1) as f64));
        }
    }
    Ok(out)
}

/// Re-rank every list of `run`.
pub fn rerank<S: PairScorer + ?Sized>(run: &Run, scorer: &S, config: &RerankConfig) -> Result<Run> {
    run.iter()
        .map(|(q, list)| Ok((q.to_string(), rerank_list(q, list, scorer, config)?)))
        .collect()
}
