//! The toy contrastive study on the synthetic collection: an untrained
//! encoder, one trained with in-batch negatives and one trained with an
//! added BM25 hard negative, each over a fixed list of training seeds.

use evidence_core::contrastive::{train, Init, Regime, TextView, ToyEncoder, TrainConfig, TrainExample};
use evidence_core::corpus::Split;
use evidence_core::dense::{embed_document, embed_text, search, EmbeddingSet};
use evidence_core::evaluation::{evaluate, gold_rank};
use evidence_core::rerank::{rerank, OverlapScorer, RerankConfig};
use evidence_core::run::Run;
use evidence_core::sparse::{Bm25Index, Bm25Params};
use evidence_core::synthetic::{generate, SyntheticCollection, SyntheticConfig};
use evidence_core::textproc::{compose_document_text, AnalyzerConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NegativeSettings;
use crate::error::PipelineError;

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySettings {
    pub corpus: SyntheticConfig,
    /// The seed field is replaced by each entry of `seeds`.
    pub train: TrainConfig,
    pub negatives: NegativeSettings,
    pub seeds: Vec<u64>,
    /// Dense list depth; the re-ranker re-orders the first `rerank_depth`.
    pub depth: usize,
    pub rerank_depth: usize,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            corpus: SyntheticConfig::default(),
            train: TrainConfig {
                batch_size: 16,
                learning_rate: 1.0,
                epochs: 2,
                dim_out: 128,
                dim_feat: 2048,
                init: Init::Random,
                ..TrainConfig::default()
            },
            negatives: NegativeSettings::default(),
            seeds: (1..=8).collect(),
            depth: 20,
            rerank_depth: RerankConfig::default().depth,
        }
    }
}

/// Dev MRR@5 of the three encoders for one training seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub untrained: f64,
    pub in_batch: f64,
    pub hard_negative: f64,
    pub rerank: DepthBoundCheck,
}

/// What re-ranking the hard-negative encoder's dev run did at rank 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DepthBoundCheck {
    pub queries: usize,
    /// Queries whose gold document moved to rank 1.
    pub promoted: usize,
    /// Queries whose gold document left rank 1.
    pub demoted: usize,
    /// Queries whose new top document came from outside the head, or whose
    /// tail changed order, or whose head lost or gained documents.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub documents: usize,
    pub queries: usize,
    pub dev_queries: usize,
    pub bm25_dev_mrr_at_5: f64,
    pub seeds: Vec<SeedResult>,
    pub mean_untrained: f64,
    pub mean_in_batch: f64,
    pub mean_hard_negative: f64,
}

impl StudyReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "synthetic collection: {} documents, {} queries ({} dev)\nBM25 dev MRR@5: {:.4}\n\n{:>6} {:>10} {:>10} {:>14} {:>9}\n",
            self.documents, self.queries, self.dev_queries, self.bm25_dev_mrr_at_5, "seed", "untrained", "in-batch", "hard-negative", "promoted"
        );
        for r in &self.seeds {
            s.push_str(&format!(
                "{:>6} {:>10.4} {:>10.4} {:>14.4} {:>9}\n",
                r.seed, r.untrained, r.in_batch, r.hard_negative, r.rerank.promoted
            ));
        }
        s.push_str(&format!(
            "{:>6} {:>10.4} {:>10.4} {:>14.4}\n",
            "mean", self.mean_untrained, self.mean_in_batch, self.mean_hard_negative
        ));
        s
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Dense run of `encoder` over the queries of `split`.
pub fn dense_run(
    collection: &SyntheticCollection,
    encoder: &ToyEncoder,
    view: &TextView,
    config: &TrainConfig,
    split: Split,
    depth: usize,
) -> Result<Run> {
    let docs = collection
        .corpus
        .documents()
        .par_iter()
        .map(|d| Ok((d.doc_id.clone(), embed_document(d, &view.fields, &view.analyzer, encoder, &config.chunking)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut set = EmbeddingSet::new(encoder.dim_out())?;
    for (id, v) in docs {
        set.insert(id, v)?;
    }
    let queries = collection.queries_in(split);
    let lists = queries
        .par_iter()
        .map(|q| {
            let v = embed_text(&q.text, &view.analyzer, encoder, &config.chunking)?;
            Ok((q.query_id.clone(), search(&set, &v, depth)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(lists.into_iter().collect())
}

/// Compare a run with its re-ranked version query by query.
pub fn depth_bound_check(before: &Run, after: &Run, collection: &SyntheticCollection, depth: usize) -> DepthBoundCheck {
    let mut check = DepthBoundCheck::default();
    for (qid, old) in before.iter() {
        check.queries += 1;
        let new = after.get(qid).unwrap_or(&[]);
        let ids = |l: &[evidence_core::run::ScoredDoc]| l.iter().map(|d| d.doc_id.clone()).collect::<Vec<_>>();
        let (old_ids, new_ids) = (ids(old), ids(new));
        let k = depth.min(old_ids.len());
        let mut old_head = old_ids[..k].to_vec();
        let mut new_head = new_ids.get(..k).map(<[String]>::to_vec).unwrap_or_default();
        old_head.sort();
        new_head.sort();
        let tail_kept = new_ids.len() == old_ids.len() && old_ids[k..] == new_ids[k..];
        if old_head != new_head || !tail_kept {
            check.violations += 1;
        }
        let Some(gold) = collection.gold.get(qid) else { continue };
        let was_top = gold_rank(old, gold) == Some(1);
        let is_top = gold_rank(new, gold) == Some(1);
        if is_top && !was_top {
            if gold_rank(old, gold).is_none_or(|r| r > depth) {
                check.violations += 1;
            }
            check.promoted += 1;
        }
        if was_top && !is_top {
            check.demoted += 1;
        }
    }
    check
}

fn examples_for(collection: &SyntheticCollection, settings: &StudySettings) -> Result<Vec<TrainExample>> {
    let analyzer = AnalyzerConfig::full();
    let view = TextView::default();
    let index = Bm25Index::build(&collection.corpus, &view.fields, &analyzer)?;
    let params = Bm25Params::default();
    let n = settings.negatives;
    collection
        .queries_in(Split::Train)
        .iter()
        .map(|q| {
            let positive = collection
                .gold
                .get(&q.query_id)
                .ok_or_else(|| PipelineError::Data(format!("query `{}` has no gold document", q.query_id)))?;
            // Queries with too few BM25 candidates simply get no hard negative.
            let hard_negatives =
                index.mine_hard_negatives(q, &collection.gold, n.pool_depth, n.count, &params, &analyzer, None).unwrap_or_default();
            Ok(TrainExample { query_id: q.query_id.clone(), positive: positive.to_string(), hard_negatives })
        })
        .collect()
}

fn bm25_dev_mrr(collection: &SyntheticCollection) -> Result<f64> {
    let analyzer = AnalyzerConfig::full();
    let view = TextView::default();
    let index = Bm25Index::build(&collection.corpus, &view.fields, &analyzer)?;
    let dev = collection.queries_in(Split::Dev);
    let mut run = Run::new();
    for q in &dev {
        run.insert(q.query_id.clone(), index.retrieve(&q.text, 10, &Bm25Params::default(), &analyzer, None)?);
    }
    Ok(evaluate(&run, &collection.gold)?.metrics.mrr_at_5)
}

pub fn run_study(settings: &StudySettings) -> Result<StudyReport> {
    if settings.seeds.is_empty() {
        return Err(PipelineError::Config("the study needs at least one seed".into()));
    }
    let collection = generate(&settings.corpus);
    let hard = examples_for(&collection, settings)?;
    let in_batch: Vec<TrainExample> =
        hard.iter().map(|e| TrainExample { hard_negatives: Vec::new(), ..e.clone() }).collect();
    let view = TextView::default();
    let doc_texts: Vec<(&str, String)> = collection
        .corpus
        .iter()
        .map(|d| Ok((d.doc_id.as_str(), compose_document_text(d, &view.fields)?)))
        .collect::<Result<_>>()?;
    let dev = collection.queries_in(Split::Dev);
    let scorer = OverlapScorer::new(
        dev.iter().map(|q| (q.query_id.as_str(), q.text.as_str())),
        doc_texts.iter().map(|(id, t)| (*id, t.clone())),
        &AnalyzerConfig::full(),
    );
    let rerank_config = RerankConfig { depth: settings.rerank_depth, ..RerankConfig::default() };

    let mut results = Vec::with_capacity(settings.seeds.len());
    for &seed in &settings.seeds {
        let config = TrainConfig { seed, ..settings.train.clone() };
        let mrr5 = |enc: &ToyEncoder| -> Result<(f64, Run)> {
            let run = dense_run(&collection, enc, &view, &config, Split::Dev, settings.depth)?;
            Ok((evaluate(&run, &collection.gold)?.metrics.mrr_at_5, run))
        };
        let untrained = ToyEncoder::initialize(config.init, config.dim_out, config.dim_feat, seed)?;
        let ib = train(&in_batch, &collection.queries, &collection.corpus, &view, &config, Regime::InBatch)?;
        let hn = train(&hard, &collection.queries, &collection.corpus, &view, &config, Regime::InBatchPlusHardNegatives)?;
        let (hn_mrr, hn_run) = mrr5(&hn.encoder)?;
        let reranked = rerank(&hn_run, &scorer, &rerank_config)?;
        let result = SeedResult {
            seed,
            untrained: mrr5(&untrained)?.0,
            in_batch: mrr5(&ib.encoder)?.0,
            hard_negative: hn_mrr,
            rerank: depth_bound_check(&hn_run, &reranked, &collection, settings.rerank_depth),
        };
        log::info!(
            "seed {seed}: untrained {:.4}, in-batch {:.4}, hard-negative {:.4}",
            result.untrained,
            result.in_batch,
            result.hard_negative
        );
        results.push(result);
    }
    Ok(StudyReport {
        documents: collection.corpus.len(),
        queries: collection.queries.len(),
        dev_queries: dev.len(),
        bm25_dev_mrr_at_5: bm25_dev_mrr(&collection)?,
        mean_untrained: mean(results.iter().map(|r| r.untrained)),
        mean_in_batch: mean(results.iter().map(|r| r.in_batch)),
        mean_hard_negative: mean(results.iter().map(|r| r.hard_negative)),
        seeds: results,
    })
}
