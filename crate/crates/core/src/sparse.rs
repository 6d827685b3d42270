//! Okapi BM25 over an inverted index.
//!
//! Scoring sums, over the distinct query terms that occur in the document,
//!
//! ```text
//! tf / (k1 * ((1 - b) + b * dl / avgdl) + tf)  *  ln((N - df + 0.5) / (df + 0.5))
//! ```
//!
//! The IDF factor is negative for terms present in more than half of the
//! collection. [`IdfMode::EpsilonFloor`] replaces negative IDFs with
//! `epsilon` times the mean positive IDF of the vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, GoldMapping, Query};
use crate::run::{sort_ranking, ScoredDoc};
use crate::textproc::{analyze, compose_document_text, AnalyzerConfig, FieldSelection};

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("cannot index an empty collection")]
    EmptyCollection,
    #[error("document `{0}` is not in the index")]
    UnknownDocument(String),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("retrieval depth must be at least 1")]
    InvalidDepth,
    #[error("query `{0}` has no gold document")]
    NoGold(String),
    #[error("query `{query_id}`: {found} non-gold candidates retrieved, {needed} needed")]
    InsufficientCandidates { query_id: String, found: usize, needed: usize },
    #[error("collection has {available} non-gold documents, {needed} needed")]
    CollectionTooSmall { available: usize, needed: usize },
}

type Result<T> = std::result::Result<T, SparseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfMode {
    Verbatim,
    EpsilonFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    #[serde(default = "default_idf_mode")]
    pub idf_mode: IdfMode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_idf_mode() -> IdfMode {
    IdfMode::Verbatim
}

fn default_epsilon() -> f64 {
    0.25
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75, idf_mode: IdfMode::Verbatim, epsilon: 0.25 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(SparseError::InvalidParams(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(SparseError::InvalidParams(format!("b must lie in [0, 1], got {}", self.b)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(SparseError::InvalidParams(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Robertson/Spärck-Jones IDF with natural log.
pub fn rsj_idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5)).ln()
}

/// Saturated, length-normalized term frequency. Tends to 1 as `tf` grows.
pub fn tf_component(tf: f64, dl: f64, avgdl: f64, k1: f64, b: f64) -> f64 {
    tf / (k1 * ((1.0 - b) + b * dl / avgdl) + tf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    /// Term to postings sorted by document ordinal.
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avgdl: f64,
    doc_ids: Vec<String>,
    #[serde(skip)]
    ordinals: HashMap<String, u32>,
    mean_positive_idf: f64,
}

impl Bm25Index {
    /// Index `analyze(compose_document_text(doc, fields))` for every document.
    /// Documents without any tokens keep length 0 and appear in no posting.
    pub fn build(corpus: &Corpus, fields: &FieldSelection, analyzer: &AnalyzerConfig) -> Result<Self> {
        if corpus.is_empty() {
            return Err(SparseError::EmptyCollection);
        }
        let texts = corpus.iter().map(|doc| {
            let text = compose_document_text(doc, fields).unwrap_or_default();
            (doc.doc_id.clone(), analyze(&text, analyzer).into_inner())
        });
        Self::from_tokenized(texts)
    }

    /// Index pre-tokenized documents, in the given order.
    pub fn from_tokenized<I>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::new();
        let mut doc_ids = Vec::new();
        for (ordinal, (doc_id, tokens)) in docs.into_iter().enumerate() {
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (term, count) in tf {
                postings
                    .entry(term.to_string())
                    .or_default()
                    .push(Posting { doc: ordinal as u32, tf: count });
            }
            doc_lengths.push(tokens.len() as u32);
            doc_ids.push(doc_id);
        }
        if doc_ids.is_empty() {
            return Err(SparseError::EmptyCollection);
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avgdl = total as f64 / doc_lengths.len() as f64;
        let mut index = Self {
            postings,
            doc_lengths,
            avgdl,
            doc_ids,
            ordinals: HashMap::new(),
            mean_positive_idf: 0.0,
        };
        index.rebuild_lookup();
        let positive: Vec<f64> = index
            .postings
            .values()
            .map(|p| rsj_idf(index.doc_count(), p.len()))
            .filter(|&idf| idf > 0.0)
            .collect();
        if !positive.is_empty() {
            index.mean_positive_idf = positive.iter().sum::<f64>() / positive.len() as f64;
        }
        Ok(index)
    }

    /// Restore the id lookup table after deserialization.
    pub fn rebuild_lookup(&mut self) {
        self.ordinals = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.ordinals.get(doc_id).map(|&o| self.doc_lengths[o as usize])
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    /// IDF of a term with document frequency `df`, after the configured floor.
    pub fn idf(&self, df: usize, params: &Bm25Params) -> f64 {
        let idf = rsj_idf(self.doc_count(), df);
        match params.idf_mode {
            IdfMode::Verbatim => idf,
            IdfMode::EpsilonFloor if idf < 0.0 => params.epsilon * self.mean_positive_idf,
            IdfMode::EpsilonFloor => idf,
        }
    }

    /// BM25 score of one document. Repeated query terms count once.
    pub fn score(&self, query_tokens: &[String], doc_id: &str, params: &Bm25Params) -> Result<f64> {
        let ordinal = *self
            .ordinals
            .get(doc_id)
            .ok_or_else(|| SparseError::UnknownDocument(doc_id.to_string()))?;
        let dl = f64::from(self.doc_lengths[ordinal as usize]);
        let terms: BTreeSet<&str> = query_tokens.iter().map(String::as_str).collect();
        let mut score = 0.0;
        for term in terms {
            let list = self.postings(term);
            if let Ok(pos) = list.binary_search_by_key(&ordinal, |p| p.doc) {
                let tf = f64::from(list[pos].tf);
                score += tf_component(tf, dl, self.avgdl, params.k1, params.b) * self.idf(list.len(), params);
            }
        }
        Ok(score)
    }

    /// Score every document sharing at least one term with the query and
    /// return the best `k`, ties broken by ascending doc id. Documents that
    /// share no term are not retrieved.
    pub fn rank(&self, query_tokens: &[String], k: usize, params: &Bm25Params) -> Result<Vec<ScoredDoc>> {
        params.validate()?;
        if k == 0 {
            return Err(SparseError::InvalidDepth);
        }
        let terms: BTreeSet<&str> = query_tokens.iter().map(String::as_str).collect();
        let mut acc: HashMap<u32, f64> = HashMap::new();
        // term-major accumulation; per document the summation order is the
        // sorted term order, same as `score`
        for term in terms {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = self.idf(list.len(), params);
            for p in list {
                let dl = f64::from(self.doc_lengths[p.doc as usize]);
                let w = tf_component(f64::from(p.tf), dl, self.avgdl, params.k1, params.b) * idf;
                *acc.entry(p.doc).or_insert(0.0) += w;
            }
        }
        let mut ranked: Vec<ScoredDoc> = acc
            .into_iter()
            .map(|(doc, s)| ScoredDoc::new(self.doc_ids[doc as usize].clone(), s))
            .collect();
        sort_ranking(&mut ranked);
        ranked.truncate(k);
        Ok(ranked)
    }

    /// Analyze `query_text` and return its top-`k` list, consulting `cache`
    /// first when given. A cache must only ever be used with one index.
    pub fn retrieve(
        &self,
        query_text: &str,
        k: usize,
        params: &Bm25Params,
        analyzer: &AnalyzerConfig,
        cache: Option<&QueryCache>,
    ) -> Result<Vec<ScoredDoc>> {
        let tokens = analyze(query_text, analyzer).into_inner();
        let Some(cache) = cache else {
            return self.rank(&tokens, k, params);
        };
        let key = CacheKey::new(tokens, k, params);
        if let Some(hit) = cache.lookup(&key) {
            return Ok(hit.to_vec());
        }
        let ranked = self.rank(&key.tokens, k, params)?;
        cache.store(key, ranked.clone());
        Ok(ranked)
    }

    /// The first `n` documents of the top-`pool_k` list for `query`, with its
    /// gold document removed. Order is preserved.
    #[allow(clippy::too_many_arguments)]
    pub fn mine_hard_negatives(
        &self,
        query: &Query,
        gold: &GoldMapping,
        pool_k: usize,
        n: usize,
        params: &Bm25Params,
        analyzer: &AnalyzerConfig,
        cache: Option<&QueryCache>,
    ) -> Result<Vec<String>> {
        let positive = gold
            .get(&query.query_id)
            .ok_or_else(|| SparseError::NoGold(query.query_id.clone()))?;
        let pool = self.retrieve(&query.text, pool_k.max(1), params, analyzer, cache)?;
        let negatives: Vec<String> = pool
            .into_iter()
            .filter(|d| d.doc_id != positive)
            .take(n)
            .map(|d| d.doc_id)
            .collect();
        if negatives.len() < n {
            return Err(SparseError::InsufficientCandidates {
                query_id: query.query_id.clone(),
                found: negatives.len(),
                needed: n,
            });
        }
        Ok(negatives)
    }

    /// Fallback when BM25 yields too few candidates: `n` distinct uniformly
    /// drawn documents other than `positive`, excluding `exclude`.
    pub fn sample_negatives<R: Rng>(
        &self,
        positive: &str,
        exclude: &[String],
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<String>> {
        let pool: Vec<&String> = self
            .doc_ids
            .iter()
            .filter(|id| id.as_str() != positive && !exclude.contains(id))
            .collect();
        if pool.len() < n {
            return Err(SparseError::CollectionTooSmall { available: pool.len(), needed: n });
        }
        Ok(pool.choose_multiple(rng, n).map(|s| (*s).clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    tokens: Vec<String>,
    k: usize,
    k1: u64,
    b: u64,
    idf_mode: IdfMode,
    epsilon: u64,
}

impl CacheKey {
    fn new(tokens: Vec<String>, k: usize, params: &Bm25Params) -> Self {
        Self {
            tokens,
            k,
            k1: params.k1.to_bits(),
            b: params.b.to_bits(),
            idf_mode: params.idf_mode,
            epsilon: params.epsilon.to_bits(),
        }
    }
}

/// Thread-safe memo of top-k lists keyed by analyzed query, depth and
/// parameters.
#[derive(Debug, Default)]
pub struct QueryCache {
    entries: RwLock<HashMap<CacheKey, Arc<[ScoredDoc]>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl QueryCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn lookup(&self, key: &CacheKey) -> Option<Arc<[ScoredDoc]>> {
        let found = self.entries.read().unwrap_or_else(|e| e.into_inner()).get(key).cloned();
        match found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    fn store(&self, key: CacheKey, ranked: Vec<ScoredDoc>) {
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .entry(key)
            .or_insert_with(|| ranked.into());
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Split};
    use crate::textproc::{AnalyzerMode, Field};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn three_docs() -> Bm25Index {
        Bm25Index::from_tokenized([
            ("d1".to_string(), toks("cat sat")),
            ("d2".to_string(), toks("cat cat")),
            ("d3".to_string(), toks("dog")),
        ])
        .unwrap()
    }

    #[test]
    fn index_statistics_by_hand() {
        let idx = three_docs();
        assert_eq!(idx.doc_count(), 3);
        assert!((idx.avgdl() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(idx.df("cat"), 2);
        assert_eq!(idx.df("dog"), 1);
        assert_eq!(idx.df("bird"), 0);
    }

    #[test]
    fn dog_query_scores_hand_value() {
        let idx = three_docs();
        let params = Bm25Params::default();
        // K = 1.5 * (0.25 + 0.75 * 3/5) = 1.05; tf part = 1/2.05; idf = ln(2.5/1.5)
        let expected = (1.0 / 2.05) * (2.5f64 / 1.5).ln();
        assert!((expected - 0.249_183_231_105_361_36).abs() < 1e-15);
        let got = idx.score(&toks("dog"), "d3", &params).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got}");
        assert_eq!(idx.score(&toks("dog"), "d1", &params).unwrap(), 0.0);
        assert_eq!(idx.score(&toks("bird fish"), "d1", &params).unwrap(), 0.0);
        assert_eq!(
            idx.score(&toks("dog"), "d9", &params),
            Err(SparseError::UnknownDocument("d9".into()))
        );
    }

    #[test]
    fn retrieve_omits_non_matching_documents() {
        let idx = three_docs();
        let ranked = idx
            .retrieve("dog", 10, &Bm25Params::default(), &AnalyzerConfig::whitespace(), None)
            .unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].doc_id, "d3");
        assert!((ranked[0].score - 0.249_183_231_105_361_36).abs() < 1e-12);
    }

    #[test]
    fn repeated_query_terms_count_once() {
        let idx = three_docs();
        let p = Bm25Params::default();
        assert_eq!(idx.score(&toks("dog dog"), "d3", &p).unwrap(), idx.score(&toks("dog"), "d3", &p).unwrap());
    }

    #[test]
    fn zero_b_ignores_document_length() {
        let idx = Bm25Index::from_tokenized([
            ("short".to_string(), toks("x a")),
            ("long".to_string(), toks("x b c d e f g")),
            ("o1".to_string(), toks("h")),
            ("o2".to_string(), toks("i")),
            ("o3".to_string(), toks("j")),
        ])
        .unwrap();
        let p = Bm25Params { b: 0.0, ..Default::default() };
        let s1 = idx.score(&toks("x"), "short", &p).unwrap();
        let s2 = idx.score(&toks("x"), "long", &p).unwrap();
        assert_eq!(s1, s2);
        let p = Bm25Params::default();
        assert!(idx.score(&toks("x"), "short", &p).unwrap() > idx.score(&toks("x"), "long", &p).unwrap());
    }

    #[test]
    fn idf_sign_flips_above_half_the_collection() {
        // |D| = 10: df = 5 gives ln(1) = 0, df = 6 negative, df = 4 positive
        assert!(rsj_idf(10, 4) > 0.0);
        assert_eq!(rsj_idf(10, 5), 0.0);
        assert!(rsj_idf(10, 6) < 0.0);
        // odd |D| = 7: boundary sits between 3 and 4
        assert!(rsj_idf(7, 3) > 0.0);
        assert!(rsj_idf(7, 4) < 0.0);
    }

    #[test]
    fn epsilon_floor_replaces_negative_idf() {
        let idx = Bm25Index::from_tokenized([
            ("a".to_string(), toks("common x")),
            ("b".to_string(), toks("common y")),
            ("c".to_string(), toks("common z")),
        ])
        .unwrap();
        let verbatim = Bm25Params::default();
        let floored = Bm25Params { idf_mode: IdfMode::EpsilonFloor, ..Default::default() };
        assert!(idx.idf(3, &verbatim) < 0.0);
        let mean_pos = rsj_idf(3, 1);
        assert!((idx.idf(3, &floored) - 0.25 * mean_pos).abs() < 1e-15);
        assert_eq!(idx.idf(1, &floored), idx.idf(1, &verbatim));
    }

    #[test]
    fn tf_component_is_increasing_and_saturates() {
        let mut prev = 0.0;
        for tf in 1..200 {
            let v = tf_component(f64::from(tf), 10.0, 8.0, 1.5, 0.75);
            assert!(v > prev && v < 1.0);
            prev = v;
        }
        assert!(1.0 - tf_component(1e9, 10.0, 8.0, 1.5, 0.75) < 1e-8);
    }

    #[test]
    fn empty_text_document_is_never_retrieved() {
        let corpus = Corpus::from_documents(vec![
            Document { doc_id: "a".into(), title: "cat".into(), ..Default::default() },
            Document { doc_id: "b".into(), title: "!!! ???".into(), ..Default::default() },
        ])
        .unwrap();
        let analyzer = AnalyzerConfig::plain();
        let idx = Bm25Index::build(&corpus, &FieldSelection::title_abstract(), &analyzer).unwrap();
        assert_eq!(idx.doc_length("b"), Some(0));
        for q in ["cat", "!!!", "sep", "b"] {
            let ranked = idx.retrieve(q, 5, &Bm25Params::default(), &analyzer, None).unwrap();
            assert!(ranked.iter().all(|d| d.doc_id != "b"));
        }
    }

    #[test]
    fn build_is_deterministic() {
        let corpus = Corpus::from_documents(vec![
            Document { doc_id: "a".into(), title: "x y".into(), abstract_text: "z".into(), ..Default::default() },
            Document { doc_id: "b".into(), title: "y".into(), ..Default::default() },
        ])
        .unwrap();
        let fields = FieldSelection::new(vec![Field::Title, Field::Abstract]).unwrap();
        let a = Bm25Index::build(&corpus, &fields, &AnalyzerConfig::full()).unwrap();
        let b = Bm25Index::build(&corpus, &fields, &AnalyzerConfig::full()).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn empty_collection_is_rejected() {
        let empty = Corpus::default();
        assert_eq!(
            Bm25Index::build(&empty, &FieldSelection::default(), &AnalyzerConfig::full()),
            Err(SparseError::EmptyCollection)
        );
    }

    #[test]
    fn cache_hit_returns_identical_list() {
        let idx = three_docs();
        let cache = QueryCache::new();
        let ws = AnalyzerConfig { mode: AnalyzerMode::Whitespace, ..AnalyzerConfig::whitespace() };
        let first = idx.retrieve("cat dog", 10, &Bm25Params::default(), &ws, Some(&cache)).unwrap();
        assert_eq!((cache.hits(), cache.misses()), (0, 1));
        let second = idx.retrieve("cat dog", 10, &Bm25Params::default(), &ws, Some(&cache)).unwrap();
        assert_eq!(cache.hits(), 1);
        assert_eq!(first, second);
        let uncached = idx.retrieve("cat dog", 10, &Bm25Params::default(), &ws, None).unwrap();
        assert_eq!(first, uncached);
        // a different depth is a different key
        idx.retrieve("cat dog", 1, &Bm25Params::default(), &ws, Some(&cache)).unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn k_larger_than_corpus() {
        let idx = three_docs();
        let ranked = idx
            .retrieve("cat dog sat", 100, &Bm25Params::default(), &AnalyzerConfig::whitespace(), None)
            .unwrap();
        assert!(ranked.len() <= 3);
        assert_eq!(
            idx.retrieve("cat", 0, &Bm25Params::default(), &AnalyzerConfig::whitespace(), None),
            Err(SparseError::InvalidDepth)
        );
    }

    fn query(id: &str, text: &str) -> Query {
        Query { query_id: id.into(), text: text.into(), split: Split::Train }
    }

    #[test]
    fn mining_skips_gold_and_keeps_order() {
        // gold is the best hit: "alpha" in g three times, d7 twice, d3 once
        let idx = Bm25Index::from_tokenized([
            ("g".to_string(), toks("alpha alpha alpha")),
            ("d7".to_string(), toks("alpha alpha beta")),
            ("d3".to_string(), toks("alpha beta beta")),
            ("x1".to_string(), toks("gamma")),
            ("x2".to_string(), toks("delta")),
            ("x3".to_string(), toks("eps")),
            ("x4".to_string(), toks("zeta")),
            ("x5".to_string(), toks("eta")),
        ])
        .unwrap();
        let ws = AnalyzerConfig::whitespace();
        let p = Bm25Params::default();
        let top: Vec<_> = idx.retrieve("alpha", 3, &p, &ws, None).unwrap().into_iter().map(|d| d.doc_id).collect();
        assert_eq!(top, ["g", "d7", "d3"]);
        let gold = GoldMapping::from_pairs([("q", "g")]).unwrap();
        let mined = idx.mine_hard_negatives(&query("q", "alpha"), &gold, 3, 1, &p, &ws, None).unwrap();
        assert_eq!(mined, ["d7"]);

        let gold_tail = GoldMapping::from_pairs([("q", "x9")]).unwrap();
        let mined = idx.mine_hard_negatives(&query("q", "alpha"), &gold_tail, 3, 2, &p, &ws, None).unwrap();
        assert_eq!(mined, ["g", "d7"]);

        assert_eq!(
            idx.mine_hard_negatives(&query("nogold", "alpha"), &gold, 3, 1, &p, &ws, None),
            Err(SparseError::NoGold("nogold".into()))
        );
    }

    #[test]
    fn mining_on_singleton_corpus_is_insufficient() {
        let idx = Bm25Index::from_tokenized([("gold".to_string(), toks("alpha"))]).unwrap();
        let gold = GoldMapping::from_pairs([("q", "gold")]).unwrap();
        let err = idx
            .mine_hard_negatives(&query("q", "alpha"), &gold, 3, 1, &Bm25Params::default(), &AnalyzerConfig::whitespace(), None)
            .unwrap_err();
        assert!(matches!(err, SparseError::InsufficientCandidates { found: 0, needed: 1, .. }));
    }

    #[test]
    fn random_fallback_excludes_gold() {
        use rand::SeedableRng;
        let idx = three_docs();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = idx.sample_negatives("d1", &[], 2, &mut rng).unwrap();
            assert_eq!(s.len(), 2);
            assert!(!s.contains(&"d1".to_string()));
        }
        assert!(idx.sample_negatives("d1", &["d2".into()], 2, &mut rng).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(Bm25Params { k1: 0.0, ..Default::default() }.validate().is_err());
        assert!(Bm25Params { b: 1.5, ..Default::default() }.validate().is_err());
        assert!(Bm25Params { epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(Bm25Params::default().validate().is_ok());
    }
}
