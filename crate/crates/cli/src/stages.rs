//! The pipeline stages. Each one reads declared inputs through a
//! [`StageIo`], computes, and commits its outputs together with a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use evidence_core::contrastive::{self, TextView, ToyEncoder, TrainExample};
use evidence_core::corpus::{self, corpus_stats, Corpus, Format, GoldMapping, LengthStats, Query, Split};
use evidence_core::dense::{self, EmbeddingProvider, EmbeddingSet, HashProjection};
use evidence_core::evaluation::{compare_runs, evaluate, rank_histogram};
use evidence_core::rerank::{rerank, OverlapScorer, ScoreTable};
use evidence_core::run::Run;
use evidence_core::sparse::{Bm25Index, SparseError};
use evidence_core::textproc::{analyze, compose_document_text, AnalyzerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{resolve, PipelineConfig, ProviderSettings, RunName, ScorerSettings};
use crate::error::PipelineError;
use crate::manifest::{Manifest, StageIo};

type Result<T> = std::result::Result<T, PipelineError>;

pub const CORPUS: &str = "ingest/corpus.jsonl";
pub const GOLD: &str = "ingest/gold.tsv";
pub const STATS: &str = "ingest/stats.json";
pub const INDEX: &str = "index/bm25.json";
pub const EXAMPLES: &str = "train/examples.jsonl";
pub const CHECKPOINT: &str = "model/toy.ckpt";
pub const LOSS_TRACE: &str = "model/loss_trace.csv";
pub const DOC_EMBEDDINGS: &str = "embeddings/documents.emb";

pub fn queries_artifact(split: Split) -> String {
    format!("ingest/queries.{split}.jsonl")
}

pub fn query_embeddings_artifact(split: Split) -> String {
    format!("embeddings/queries.{split}.emb")
}

pub fn run_artifact(run: RunName, split: Split) -> String {
    format!("runs/{}.{split}.trec", run.as_str())
}

pub fn metrics_artifact(run: RunName, split: Split, ext: &str) -> String {
    format!("reports/metrics.{}.{split}.{ext}", run.as_str())
}

pub fn compare_artifact(a: RunName, b: RunName, split: Split, ext: &str) -> String {
    format!("reports/compare.{}_vs_{}.{split}.{ext}", a.as_str(), b.as_str())
}

pub fn histogram_artifact(run: RunName, split: Split) -> String {
    format!("plots/rank_hist.{}.{split}.csv", run.as_str())
}

pub fn query_lengths_artifact(split: Split) -> String {
    format!("plots/query_lengths.{split}.csv")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Index,
    SparseRetrieve,
    MineNegatives,
    TrainToy,
    Embed,
    DenseRetrieve,
    Rerank,
    Evaluate,
    Compare,
    ExportPlots,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Index,
        Stage::SparseRetrieve,
        Stage::MineNegatives,
        Stage::TrainToy,
        Stage::Embed,
        Stage::DenseRetrieve,
        Stage::Rerank,
        Stage::Evaluate,
        Stage::Compare,
        Stage::ExportPlots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Index => "index",
            Stage::SparseRetrieve => "sparse-retrieve",
            Stage::MineNegatives => "mine-negatives",
            Stage::TrainToy => "train-toy",
            Stage::Embed => "embed",
            Stage::DenseRetrieve => "dense-retrieve",
            Stage::Rerank => "rerank",
            Stage::Evaluate => "evaluate",
            Stage::Compare => "compare",
            Stage::ExportPlots => "export-plots",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Serialize)]
struct SplitStats {
    count: usize,
    tokens: LengthStats,
}

#[derive(Debug, Serialize)]
struct IngestStats {
    documents: usize,
    document_tokens: LengthStats,
    queries: BTreeMap<Split, SplitStats>,
}

/// A configured pipeline bound to a data root and an output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    data_root: PathBuf,
    output_dir: PathBuf,
    config_hash: String,
}

impl Pipeline {
    /// Relative data paths resolve against `data_root`; the output directory
    /// is used as given.
    pub fn new(config: PipelineConfig, data_root: PathBuf, output_dir: PathBuf) -> Self {
        let config_hash = config.hash();
        Self { config, data_root, output_dir, config_hash }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn output_dir(&self) -> &Path {
        &self.output_dir
    }

    /// Stages run by `all`, in order. Negative mining and training are only
    /// needed when the dense stage uses the toy encoder.
    pub fn plan(&self) -> Vec<Stage> {
        let toy = self.config.dense.provider == ProviderSettings::Toy;
        Stage::ALL
            .into_iter()
            .filter(|s| toy || !matches!(s, Stage::MineNegatives | Stage::TrainToy))
            .collect()
    }

    pub fn run_all(&self) -> Result<Vec<Manifest>> {
        self.plan().into_iter().map(|s| self.run(s)).collect()
    }

    pub fn run(&self, stage: Stage) -> Result<Manifest> {
        log::info!("running stage {stage}");
        let mut io = StageIo::new(stage.name(), self.config_hash.clone(), &self.output_dir, &self.data_root);
        match stage {
            Stage::Ingest => self.ingest(&mut io)?,
            Stage::Index => self.index(&mut io)?,
            Stage::SparseRetrieve => self.sparse_retrieve(&mut io)?,
            Stage::MineNegatives => self.mine_negatives(&mut io)?,
            Stage::TrainToy => self.train_toy(&mut io)?,
            Stage::Embed => self.embed(&mut io)?,
            Stage::DenseRetrieve => self.dense_retrieve(&mut io)?,
            Stage::Rerank => self.rerank(&mut io)?,
            Stage::Evaluate => self.evaluate(&mut io)?,
            Stage::Compare => self.compare(&mut io)?,
            Stage::ExportPlots => self.export_plots(&mut io)?,
        }
        io.commit()
    }

    fn analyzer(&self, settings: &crate::config::AnalyzerSettings) -> Result<AnalyzerConfig> {
        settings.build(&self.data_root)
    }

    fn data_path(&self, path: &Path) -> PathBuf {
        resolve(&self.data_root, path)
    }

    // -- artifact readers ---------------------------------------------------

    fn load_corpus(&self, io: &mut StageIo) -> Result<Corpus> {
        let bytes = io.read_artifact(CORPUS, "ingest")?;
        Ok(corpus::read_corpus(&bytes[..], Format::Jsonl)?)
    }

    fn load_gold(&self, io: &mut StageIo) -> Result<GoldMapping> {
        let bytes = io.read_artifact(GOLD, "ingest")?;
        Ok(corpus::read_gold(&bytes[..], Format::Tsv)?)
    }

    fn load_queries(&self, io: &mut StageIo, split: Split) -> Result<Vec<Query>> {
        if !self.config.data.queries.contains_key(&split) {
            return Err(PipelineError::Config(format!("stage `{}` needs data.queries.{split}", io.stage())));
        }
        let bytes = io.read_artifact(&queries_artifact(split), "ingest")?;
        Ok(corpus::read_queries(&bytes[..], Format::Jsonl, split)?)
    }

    fn load_index(&self, io: &mut StageIo) -> Result<Bm25Index> {
        let bytes = io.read_artifact(INDEX, "index")?;
        let mut index: Bm25Index =
            serde_json::from_slice(&bytes).map_err(|e| PipelineError::data(INDEX, e))?;
        index.rebuild_lookup();
        Ok(index)
    }

    fn load_run(&self, io: &mut StageIo, run: RunName, split: Split) -> Result<Run> {
        let path = run_artifact(run, split);
        let bytes = io.read_artifact(&path, run.producer())?;
        Run::read_trec(&bytes[..]).map_err(|e| PipelineError::data(&path, e))
    }

    /// A run completed with empty lists for split queries it does not cover.
    fn load_run_for_eval(&self, io: &mut StageIo, run: RunName, split: Split, queries: &[Query]) -> Result<Run> {
        let mut r = self.load_run(io, run, split)?;
        let known: BTreeSet<&str> = queries.iter().map(|q| q.query_id.as_str()).collect();
        if let Some(stray) = r.query_ids().find(|q| !known.contains(q)) {
            return Err(PipelineError::Data(format!(
                "{}: query `{stray}` is not in the {split} split",
                run_artifact(run, split)
            )));
        }
        r.ensure_queries(queries.iter().map(|q| q.query_id.as_str()));
        Ok(r)
    }

    fn load_embeddings(&self, io: &mut StageIo, relative: &str) -> Result<EmbeddingSet> {
        let bytes = io.read_artifact(relative, "embed")?;
        dense::read_embeddings_from(&bytes).map_err(|e| PipelineError::data(relative, e))
    }

    // -- stages -------------------------------------------------------------

    fn ingest(&self, io: &mut StageIo) -> Result<()> {
        let data = &self.config.data;
        let corpus_path = self.data_path(&data.corpus);
        let bytes = io.read_input(&corpus_path)?;
        let corpus = corpus::read_corpus(&bytes[..], Format::from_path(&corpus_path))
            .map_err(|e| PipelineError::data(corpus_path.display(), e))?;

        let mut seen = BTreeSet::new();
        let mut splits = BTreeMap::new();
        for (&split, path) in &data.queries {
            let path = self.data_path(path);
            let bytes = io.read_input(&path)?;
            let queries = corpus::read_queries(&bytes[..], Format::from_path(&path), split)
                .map_err(|e| PipelineError::data(path.display(), e))?;
            for q in &queries {
                if !seen.insert(q.query_id.clone()) {
                    return Err(PipelineError::Data(format!("query `{}` appears in more than one split", q.query_id)));
                }
            }
            splits.insert(split, queries);
        }

        let gold_path = self.data_path(&data.gold);
        let bytes = io.read_input(&gold_path)?;
        let gold = corpus::read_gold(&bytes[..], Format::from_path(&gold_path))
            .map_err(|e| PipelineError::data(gold_path.display(), e))?;
        gold.validate(&corpus)?;
        if let Some(q) = seen.iter().find(|q| gold.get(q).is_none()) {
            return Err(PipelineError::Data(format!("query `{q}` has no gold document")));
        }

        let analyzer = self.analyzer(&self.config.sparse.analyzer)?;
        let doc_texts = corpus
            .iter()
            .map(|d| compose_document_text(d, &self.config.fields))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let stats = IngestStats {
            documents: corpus.len(),
            document_tokens: corpus_stats(doc_texts.iter().map(String::as_str), &analyzer)?,
            queries: splits
                .iter()
                .filter(|(_, qs)| !qs.is_empty())
                .map(|(&split, qs)| {
                    let tokens = corpus_stats(qs.iter().map(|q| q.text.as_str()), &analyzer)?;
                    Ok((split, SplitStats { count: qs.len(), tokens }))
                })
                .collect::<Result<_>>()?,
        };

        let mut buf = Vec::new();
        corpus::write_corpus(&mut buf, &corpus, Format::Jsonl)?;
        io.write(CORPUS, buf);
        for (&split, queries) in &splits {
            let mut buf = Vec::new();
            corpus::write_queries(&mut buf, queries, Format::Jsonl)?;
            io.write(&queries_artifact(split), buf);
        }
        let mut buf = Vec::new();
        corpus::write_gold(&mut buf, &gold, Format::Tsv)?;
        io.write(GOLD, buf);
        io.write(STATS, to_json(&stats));
        Ok(())
    }

    fn index(&self, io: &mut StageIo) -> Result<()> {
        let corpus = self.load_corpus(io)?;
        let analyzer = self.analyzer(&self.config.sparse.analyzer)?;
        let index = Bm25Index::build(&corpus, &self.config.fields, &analyzer)?;
        log::info!("indexed {} documents, {} terms", index.doc_count(), index.vocabulary_size());
        io.write(INDEX, serde_json::to_vec(&index).expect("index serializes"));
        Ok(())
    }

    fn sparse_retrieve(&self, io: &mut StageIo) -> Result<()> {
        let index = self.load_index(io)?;
        let analyzer = self.analyzer(&self.config.sparse.analyzer)?;
        let s = &self.config.sparse;
        for &split in &self.config.eval_splits {
            let queries = self.load_queries(io, split)?;
            let lists = queries
                .par_iter()
                .map(|q| Ok((q.query_id.clone(), index.retrieve(&q.text, s.depth, &s.bm25, &analyzer, None)?)))
                .collect::<Result<Vec<_>>>()?;
            write_run(io, RunName::Bm25, split, lists.into_iter().collect())?;
        }
        Ok(())
    }

    fn mine_negatives(&self, io: &mut StageIo) -> Result<()> {
        let index = self.load_index(io)?;
        let gold = self.load_gold(io)?;
        let queries = self.load_queries(io, Split::Train)?;
        let analyzer = self.analyzer(&self.config.sparse.analyzer)?;
        let (params, n) = (&self.config.sparse.bm25, &self.config.negatives);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut sampled = 0;
        let mut out = Vec::new();
        for q in &queries {
            let positive = gold
                .get(&q.query_id)
                .ok_or_else(|| PipelineError::Data(format!("query `{}` has no gold document", q.query_id)))?;
            let negatives = match index.mine_hard_negatives(q, &gold, n.pool_depth, n.count, params, &analyzer, None) {
                Ok(v) => v,
                Err(SparseError::InsufficientCandidates { found, needed, .. }) => {
                    // Keep what BM25 found and fill up with uniform samples.
                    let mut v = if found > 0 {
                        index.mine_hard_negatives(q, &gold, n.pool_depth, found, params, &analyzer, None)?
                    } else {
                        Vec::new()
                    };
                    v.extend(index.sample_negatives(positive, &v, needed - found, &mut rng)?);
                    sampled += 1;
                    v
                }
                Err(e) => return Err(e.into()),
            };
            let example = TrainExample { query_id: q.query_id.clone(), positive: positive.to_string(), hard_negatives: negatives };
            out.extend(serde_json::to_vec(&example).expect("example serializes"));
            out.push(b'\n');
        }
        if sampled > 0 {
            log::warn!("{sampled} of {} training queries needed sampled negatives", queries.len());
        }
        io.write(EXAMPLES, out);
        Ok(())
    }

    fn train_toy(&self, io: &mut StageIo) -> Result<()> {
        let bytes = io.read_artifact(EXAMPLES, "mine-negatives")?;
        let examples = bytes
            .split(|&b| b == b'\n')
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| serde_json::from_slice(l).map_err(|e| PipelineError::data(format!("{EXAMPLES}: line {}", i + 1), e)))
            .collect::<Result<Vec<TrainExample>>>()?;
        let corpus = self.load_corpus(io)?;
        let queries = self.load_queries(io, Split::Train)?;
        let view = TextView { fields: self.config.fields.clone(), analyzer: self.analyzer(&self.config.dense.analyzer)? };
        let train = &self.config.train;
        let cfg = train.to_train_config(self.config.seed, self.config.dense.chunking);
        let outcome = contrastive::train(&examples, &queries, &corpus, &view, &cfg, train.regime)?;
        let mut ckpt = Vec::new();
        contrastive::write_checkpoint_to(&outcome.encoder, &mut ckpt)?;
        io.write(CHECKPOINT, ckpt);
        let mut trace = Vec::new();
        contrastive::write_trace_csv(&outcome.trace, &mut trace).expect("in-memory write");
        io.write(LOSS_TRACE, trace);
        Ok(())
    }

    fn embed(&self, io: &mut StageIo) -> Result<()> {
        match &self.config.dense.provider {
            ProviderSettings::Toy => {
                let bytes = io.read_artifact(CHECKPOINT, "train-toy")?;
                let encoder: ToyEncoder =
                    contrastive::read_checkpoint_from(&bytes).map_err(|e| PipelineError::data(CHECKPOINT, e))?;
                self.embed_with(io, &encoder)
            }
            ProviderSettings::Hash { dim } => self.embed_with(io, &HashProjection::new(*dim, self.config.seed)),
            ProviderSettings::Files { documents, queries } => self.embed_from_files(io, documents, queries),
        }
    }

    fn embed_with<P: EmbeddingProvider + Sync>(&self, io: &mut StageIo, provider: &P) -> Result<()> {
        let corpus = self.load_corpus(io)?;
        let analyzer = self.analyzer(&self.config.dense.analyzer)?;
        let chunking = &self.config.dense.chunking;
        let docs = corpus
            .documents()
            .par_iter()
            .map(|d| Ok((d.doc_id.clone(), dense::embed_document(d, &self.config.fields, &analyzer, provider, chunking)?)))
            .collect::<Result<Vec<_>>>()?;
        io.write(DOC_EMBEDDINGS, encode_set(provider.dim(), docs)?);
        for &split in &self.config.eval_splits {
            let queries = self.load_queries(io, split)?;
            let vectors = queries
                .par_iter()
                .map(|q| {
                    let v = dense::embed_text(&q.text, &analyzer, provider, chunking)
                        .map_err(|e| PipelineError::data(format!("query `{}`", q.query_id), e))?;
                    Ok((q.query_id.clone(), v))
                })
                .collect::<Result<Vec<_>>>()?;
            io.write(&query_embeddings_artifact(split), encode_set(provider.dim(), vectors)?);
        }
        Ok(())
    }

    /// Copy externally produced vectors after checking that they cover the
    /// corpus and the evaluated queries with one dimension.
    fn embed_from_files(&self, io: &mut StageIo, documents: &Path, queries: &BTreeMap<Split, PathBuf>) -> Result<()> {
        let corpus = self.load_corpus(io)?;
        let read = |io: &mut StageIo, path: &Path| -> Result<EmbeddingSet> {
            let path = self.data_path(path);
            let bytes = io.read_input(&path)?;
            dense::read_embeddings_from(&bytes).map_err(|e| PipelineError::data(path.display(), e))
        };
        let docs = read(io, documents)?;
        if let Some(d) = corpus.iter().find(|d| docs.get(&d.doc_id).is_none()) {
            return Err(PipelineError::Data(format!("{}: no vector for document `{}`", documents.display(), d.doc_id)));
        }
        io.write(DOC_EMBEDDINGS, encode(&docs)?);
        for &split in &self.config.eval_splits {
            let path = queries
                .get(&split)
                .ok_or_else(|| PipelineError::Config(format!("dense.provider.queries has no file for split `{split}`")))?;
            let set = read(io, path)?;
            if set.dim() != docs.dim() {
                return Err(PipelineError::Data(format!(
                    "{}: dimension {} differs from the document vectors' {}",
                    path.display(),
                    set.dim(),
                    docs.dim()
                )));
            }
            for q in self.load_queries(io, split)? {
                if set.get(&q.query_id).is_none() {
                    return Err(PipelineError::Data(format!("{}: no vector for query `{}`", path.display(), q.query_id)));
                }
            }
            io.write(&query_embeddings_artifact(split), encode(&set)?);
        }
        Ok(())
    }

    fn dense_retrieve(&self, io: &mut StageIo) -> Result<()> {
        let docs = self.load_embeddings(io, DOC_EMBEDDINGS)?;
        for &split in &self.config.eval_splits {
            let queries = self.load_queries(io, split)?;
            let vectors = self.load_embeddings(io, &query_embeddings_artifact(split))?;
            if vectors.dim() != docs.dim() {
                return Err(PipelineError::Data(format!(
                    "query vectors have dimension {}, documents {}",
                    vectors.dim(),
                    docs.dim()
                )));
            }
            let lists = queries
                .par_iter()
                .map(|q| {
                    let v = vectors.get(&q.query_id).ok_or_else(|| {
                        PipelineError::Data(format!("no embedding for query `{}`; re-run `embed`", q.query_id))
                    })?;
                    let ranked = dense::search(&docs, v, self.config.dense.depth)
                        .map_err(|e| PipelineError::data(format!("query `{}`", q.query_id), e))?;
                    Ok((q.query_id.clone(), ranked))
                })
                .collect::<Result<Vec<_>>>()?;
            write_run(io, RunName::Dense, split, lists.into_iter().collect())?;
        }
        Ok(())
    }

    fn rerank(&self, io: &mut StageIo) -> Result<()> {
        let settings = &self.config.rerank;
        let rerank_config = settings.rerank_config();
        let corpus = match settings.scorer {
            ScorerSettings::Overlap { .. } => Some(self.load_corpus(io)?),
            ScorerSettings::Table { .. } => None,
        };
        for &split in &self.config.eval_splits {
            let input = self.load_run(io, settings.input, split)?;
            let out = match &settings.scorer {
                ScorerSettings::Overlap { analyzer } => {
                    let analyzer = self.analyzer(analyzer)?;
                    let corpus = corpus.as_ref().expect("loaded above");
                    let queries = self.load_queries(io, split)?;
                    let doc_texts = corpus
                        .iter()
                        .map(|d| Ok((d.doc_id.as_str(), compose_document_text(d, &self.config.fields)?)))
                        .collect::<Result<Vec<_>>>()?;
                    let scorer = OverlapScorer::new(
                        queries.iter().map(|q| (q.query_id.as_str(), q.text.as_str())),
                        doc_texts,
                        &analyzer,
                    );
                    rerank(&input, &scorer, &rerank_config)?
                }
                ScorerSettings::Table { paths } => {
                    let path = paths
                        .get(&split)
                        .ok_or_else(|| PipelineError::Config(format!("rerank.scorer.paths has no file for split `{split}`")))?;
                    let path = self.data_path(path);
                    let bytes = io.read_input(&path)?;
                    let table = ScoreTable::read(&bytes[..], &path)?;
                    rerank(&input, &table, &rerank_config)?
                }
            };
            write_run(io, RunName::Rerank, split, out)?;
        }
        Ok(())
    }

    fn evaluate(&self, io: &mut StageIo) -> Result<()> {
        let gold = self.load_gold(io)?;
        for &split in &self.config.eval_splits {
            let queries = self.load_queries(io, split)?;
            for &run in &self.config.evaluate.runs {
                let r = self.load_run_for_eval(io, run, split, &queries)?;
                let report = evaluate(&r, &gold)?;
                report.check_invariants()?;
                io.write(&metrics_artifact(run, split, "json"), to_json(&report));
                io.write(&metrics_artifact(run, split, "txt"), report.to_text().into_bytes());
            }
        }
        Ok(())
    }

    fn compare(&self, io: &mut StageIo) -> Result<()> {
        let gold = self.load_gold(io)?;
        for &split in &self.config.eval_splits {
            let queries = self.load_queries(io, split)?;
            for &(a, b) in &self.config.evaluate.comparisons {
                let run_a = self.load_run_for_eval(io, a, split, &queries)?;
                let run_b = self.load_run_for_eval(io, b, split, &queries)?;
                let report = compare_runs(&run_a, &run_b, &gold)?;
                io.write(&compare_artifact(a, b, split, "json"), to_json(&report));
                io.write(&compare_artifact(a, b, split, "txt"), report.to_text().into_bytes());
            }
        }
        Ok(())
    }

    fn export_plots(&self, io: &mut StageIo) -> Result<()> {
        let gold = self.load_gold(io)?;
        for &split in &self.config.eval_splits {
            let queries = self.load_queries(io, split)?;
            for &run in &self.config.evaluate.runs {
                let r = self.load_run_for_eval(io, run, split, &queries)?;
                let hist = rank_histogram(&r, &gold, self.config.evaluate.histogram_max_rank)?;
                let mut buf = Vec::new();
                hist.write_csv(&mut buf).expect("in-memory write");
                io.write(&histogram_artifact(run, split), buf);
            }
        }
        let analyzer = self.analyzer(&self.config.sparse.analyzer)?;
        for &split in self.config.data.queries.keys() {
            let queries = self.load_queries(io, split)?;
            let mut csv = String::from("query_id,tokens\n");
            for q in &queries {
                csv.push_str(&format!("{},{}\n", csv_field(&q.query_id), analyze(&q.text, &analyzer).len()));
            }
            io.write(&query_lengths_artifact(split), csv.into_bytes());
        }
        Ok(())
    }
}

fn write_run(io: &mut StageIo, name: RunName, split: Split, run: Run) -> Result<()> {
    run.validate().map_err(|e| PipelineError::Invariant(e.to_string()))?;
    let mut buf = Vec::new();
    run.write_trec(&mut buf, name.as_str())?;
    io.write(&run_artifact(name, split), buf);
    Ok(())
}

fn encode_set(dim: usize, vectors: Vec<(String, Vec<f32>)>) -> Result<Vec<u8>> {
    let mut set = EmbeddingSet::new(dim)?;
    for (id, v) in vectors {
        set.insert(id, v)?;
    }
    encode(&set)
}

fn encode(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    dense::write_embeddings_to(set, &mut buf)?;
    Ok(buf)
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
