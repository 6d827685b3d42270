//! Toy dual encoder trained with the multiple-negatives ranking loss.
//!
//! The encoder hashes tokens into `dim_feat` buckets, ℓ2-normalizes the
//! bucket counts, applies a `dim_out × dim_feat` linear map and
//! ℓ2-normalizes the result. Queries and documents share the weights.
//! Documents longer than one chunk are embedded per chunk and combined
//! with the same mean+max pooling used by [`crate::dense`]; similarity is
//! the cosine of the two final vectors.
//!
//! For a batch of `N` queries with `K ≥ N` candidates per query (the `N`
//! in-batch positives followed by any hard negatives) the loss is
//!
//! ```text
//! L = -(1/N) Σ_i log( exp(s·S[i][i]) / Σ_j exp(s·S[i][j]) )
//! ```
//!
//! with `s` the scale and `S[i][j]` the similarity of query `i` and
//! candidate `j`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Query};
use crate::dense::{self, ChunkingConfig, DenseError, EmbeddingProvider};
use crate::hashing::{fnv1a64, unit_uniform};
use crate::textproc::{analyze, compose_document_text, AnalyzerConfig, FieldSelection};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("similarity matrix is {rows}x{cols}, expected square")]
    NonSquareMatrix { rows: usize, cols: usize },
    #[error("similarity matrix has {cols} columns but {rows} rows; need at least one column per row")]
    KLessThanN { rows: usize, cols: usize },
    #[error("similarity matrix rows have unequal lengths")]
    RaggedMatrix,
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("cannot encode an empty text")]
    EmptyText,
    #[error("encoder output has zero norm")]
    ZeroNorm,
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error("training example for `{query_id}` lists its positive `{doc_id}` as a hard negative")]
    PositiveAsNegative { query_id: String, doc_id: String },
    #[error("unknown query `{0}`")]
    UnknownQuery(String),
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(#[from] DenseError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, TrainError>;

const FEATURE_SEED: u64 = 0x5eed_f00d;

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

fn check_matrix(sim: &[Vec<f64>]) -> Result<usize> {
    let cols = sim.first().map_or(0, Vec::len);
    if sim.iter().any(|r| r.len() != cols) {
        return Err(TrainError::RaggedMatrix);
    }
    if sim.iter().flatten().any(|x| !x.is_finite()) {
        return Err(TrainError::NonFiniteInput("similarity matrix"));
    }
    Ok(cols)
}

/// Loss and its gradient with respect to every similarity entry.
/// Row maxima are subtracted before exponentiating.
fn loss_and_sim_grad(sim: &[Vec<f64>], scale: f64) -> (f64, Vec<Vec<f64>>) {
    let n = sim.len() as f64;
    let mut loss = 0.0;
    let grad = sim
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let logits: Vec<f64> = row.iter().map(|s| scale * s).collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            loss += max + z.ln() - logits[i];
            exps.iter()
                .enumerate()
                .map(|(j, e)| scale / n * (e / z - if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    (loss / n, grad)
}

/// In-batch negatives loss over a square `N × N` similarity matrix.
pub fn mnrl_loss(sim: &[Vec<f64>], scale: f64) -> Result<f64> {
    let cols = check_matrix(sim)?;
    if cols != sim.len() {
        return Err(TrainError::NonSquareMatrix { rows: sim.len(), cols });
    }
    Ok(loss_and_sim_grad(sim, scale).0)
}

/// Loss over an `N × K` matrix whose first `N` columns are the in-batch
/// positives and whose remaining columns are hard negatives.
pub fn mnrl_loss_hn(sim: &[Vec<f64>], scale: f64) -> Result<f64> {
    let cols = check_matrix(sim)?;
    if cols < sim.len() {
        return Err(TrainError::KLessThanN { rows: sim.len(), cols });
    }
    Ok(loss_and_sim_grad(sim, scale).0)
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `W[r][c] = 1` when `r == c`; needs `dim_out == dim_feat`.
    Identity,
    /// Seeded uniform entries scaled so that encoded features have norm ≈ 1.
    Random,
}

/// Linear map over hashed bag-of-token features.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    dim_out: usize,
    dim_feat: usize,
    /// Row-major `dim_out × dim_feat`.
    weights: Vec<f64>,
}

/// Sparse ℓ2-normalized feature vector: `(bucket, value)` sorted by bucket.
pub type Features = Vec<(usize, f64)>;

impl ToyEncoder {
    pub fn from_weights(dim_out: usize, dim_feat: usize, weights: Vec<f64>) -> Result<Self> {
        if dim_out == 0 || dim_feat == 0 {
            return Err(TrainError::InvalidConfig("encoder dimensions must be positive".into()));
        }
        if weights.len() != dim_out * dim_feat {
            return Err(TrainError::InvalidConfig(format!(
                "expected {} weights, got {}",
                dim_out * dim_feat,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(TrainError::NonFiniteInput("encoder weights"));
        }
        Ok(Self { dim_out, dim_feat, weights })
    }

    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self { dim_out: dim, dim_feat: dim, weights }
    }

    pub fn random(dim_out: usize, dim_feat: usize, seed: u64) -> Self {
        let mut state = seed ^ 0x7a3d_9e1f_0b5c_c4a1;
        let scale = (3.0 / dim_out as f64).sqrt();
        let weights = (0..dim_out * dim_feat).map(|_| unit_uniform(&mut state) * scale).collect();
        Self { dim_out, dim_feat, weights }
    }

    pub fn initialize(init: Init, dim_out: usize, dim_feat: usize, seed: u64) -> Result<Self> {
        match init {
            Init::Identity if dim_out != dim_feat => Err(TrainError::InvalidConfig(
                "identity init needs dim_out == dim_feat".into(),
            )),
            Init::Identity => Ok(Self::identity(dim_out)),
            Init::Random => Ok(Self::random(dim_out, dim_feat, seed)),
        }
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn dim_feat(&self) -> usize {
        self.dim_feat
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(token.as_bytes(), FEATURE_SEED) % self.dim_feat as u64) as usize
    }

    /// Hashed, ℓ2-normalized token counts.
    pub fn features(&self, tokens: &[String]) -> Result<Features> {
        if tokens.is_empty() {
            return Err(TrainError::EmptyText);
        }
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for t in tokens {
            *counts.entry(self.bucket(t)).or_default() += 1.0;
        }
        let mut feats: Features = counts.into_iter().collect();
        feats.sort_unstable_by_key(|&(b, _)| b);
        let norm = feats.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
        for (_, c) in &mut feats {
            *c /= norm;
        }
        Ok(feats)
    }

    fn project(&self, feats: &Features) -> Vec<f64> {
        (0..self.dim_out)
            .map(|r| {
                let row = &self.weights[r * self.dim_feat..(r + 1) * self.dim_feat];
                feats.iter().map(|&(c, x)| row[c] * x).sum()
            })
            .collect()
    }

    /// Unit-norm encoding of one token sequence (no chunking).
    pub fn encode_tokens(&self, tokens: &[String]) -> Result<Vec<f64>> {
        let z = self.project(&self.features(tokens)?);
        let norm = l2(&z);
        if norm == 0.0 {
            return Err(TrainError::ZeroNorm);
        }
        Ok(z.into_iter().map(|v| v / norm).collect())
    }

    /// Unit-norm encoding of raw text, tokenized with [`AnalyzerConfig::plain`].
    pub fn encode(&self, text: &str) -> Result<Vec<f64>> {
        self.encode_tokens(&analyze(text, &AnalyzerConfig::plain()))
    }
}

impl EmbeddingProvider for ToyEncoder {
    fn dim(&self) -> usize {
        self.dim_out
    }

    fn embed_chunk(&self, chunk: &[String]) -> dense::Result<Vec<f32>> {
        match self.encode_tokens(chunk) {
            Ok(v) => Ok(v.into_iter().map(|x| x as f32).collect()),
            Err(TrainError::EmptyText) => Err(DenseError::EmptyTokens),
            Err(_) => Err(DenseError::ZeroVector { id: None }),
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Forward / backward through chunking and pooling
// ---------------------------------------------------------------------------

struct ChunkPass {
    feats: Features,
    norm: f64,
    y: Vec<f64>,
}

/// Cached forward pass of one text: per-chunk unit vectors, the pooled
/// vector and its normalization.
struct TextPass {
    chunks: Vec<ChunkPass>,
    /// For each component, the chunk holding the maximum.
    argmax: Vec<usize>,
    pooled_norm: f64,
    u: Vec<f64>,
}

impl ToyEncoder {
    fn forward(&self, tokens: &[String], chunking: &ChunkingConfig) -> Result<TextPass> {
        let pieces = dense::chunk(tokens, chunking).map_err(|e| match e {
            DenseError::EmptyTokens => TrainError::EmptyText,
            other => TrainError::InvalidConfig(other.to_string()),
        })?;
        let chunks = pieces
            .into_iter()
            .map(|c| {
                let feats = self.features(c)?;
                let z = self.project(&feats);
                let norm = l2(&z);
                if norm == 0.0 {
                    return Err(TrainError::ZeroNorm);
                }
                let y = z.into_iter().map(|v| v / norm).collect();
                Ok(ChunkPass { feats, norm, y })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = chunks.len() as f64;
        let mut argmax = vec![0; self.dim_out];
        let mut pooled = vec![0.0; self.dim_out];
        for j in 0..self.dim_out {
            let mut mean = 0.0;
            for (c, pass) in chunks.iter().enumerate() {
                mean += pass.y[j];
                if pass.y[j] > chunks[argmax[j]].y[j] {
                    argmax[j] = c;
                }
            }
            pooled[j] = 0.5 * (mean / m + chunks[argmax[j]].y[j]);
        }
        let pooled_norm = l2(&pooled);
        if pooled_norm == 0.0 {
            return Err(TrainError::ZeroNorm);
        }
        let u = pooled.into_iter().map(|v| v / pooled_norm).collect();
        Ok(TextPass { chunks, argmax, pooled_norm, u })
    }

    /// Accumulate `dL/dW` given `dL/du` for one text.
    fn backward(&self, pass: &TextPass, du: &[f64], grad: &mut [f64]) {
        let m = pass.chunks.len() as f64;
        let proj = dot(&pass.u, du);
        let dh: Vec<f64> = du.iter().zip(&pass.u).map(|(d, u)| (d - u * proj) / pass.pooled_norm).collect();
        for (c, chunk) in pass.chunks.iter().enumerate() {
            let dy: Vec<f64> = (0..self.dim_out)
                .map(|j| dh[j] * (0.5 / m + if pass.argmax[j] == c { 0.5 } else { 0.0 }))
                .collect();
            let proj = dot(&chunk.y, &dy);
            for r in 0..self.dim_out {
                let dz = (dy[r] - chunk.y[r] * proj) / chunk.norm;
                if dz == 0.0 {
                    continue;
                }
                let row = &mut grad[r * self.dim_feat..(r + 1) * self.dim_feat];
                for &(col, x) in &chunk.feats {
                    row[col] += dz * x;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Candidates are the batch's positives only.
    InBatch,
    /// Batch positives followed by every example's hard negatives.
    InBatchPlusHardNegatives,
}

/// Tokenized texts of one training batch. `hard_negatives` are shared
/// candidate columns for every query in the batch.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub queries: &'a [&'a [String]],
    pub positives: &'a [&'a [String]],
    pub hard_negatives: &'a [&'a [String]],
}

/// Loss of `batch` under `regime` and its analytic gradient with respect
/// to the encoder weights (row-major, same layout as the weights).
pub fn loss_gradient(
    batch: &Batch<'_>,
    encoder: &ToyEncoder,
    scale: f64,
    chunking: &ChunkingConfig,
    regime: Regime,
) -> Result<(f64, Vec<f64>)> {
    if batch.queries.len() != batch.positives.len() {
        return Err(TrainError::InvalidConfig("batch needs one positive per query".into()));
    }
    let queries = batch
        .queries
        .iter()
        .map(|t| encoder.forward(t, chunking))
        .collect::<Result<Vec<_>>>()?;
    let negatives: &[&[String]] = match regime {
        Regime::InBatch => &[],
        Regime::InBatchPlusHardNegatives => batch.hard_negatives,
    };
    let candidates = batch
        .positives
        .iter()
        .chain(negatives)
        .map(|t| encoder.forward(t, chunking))
        .collect::<Result<Vec<_>>>()?;
    let sim: Vec<Vec<f64>> = queries
        .iter()
        .map(|q| candidates.iter().map(|c| dot(&q.u, &c.u)).collect())
        .collect();
    let (loss, g) = loss_and_sim_grad(&sim, scale);
    let mut grad = vec![0.0; encoder.weights.len()];
    for (i, q) in queries.iter().enumerate() {
        let mut du = vec![0.0; encoder.dim_out];
        for (j, c) in candidates.iter().enumerate() {
            for (d, u) in du.iter_mut().zip(&c.u) {
                *d += g[i][j] * u;
            }
        }
        encoder.backward(q, &du, &mut grad);
    }
    for (j, c) in candidates.iter().enumerate() {
        let mut du = vec![0.0; encoder.dim_out];
        for (i, q) in queries.iter().enumerate() {
            for (d, u) in du.iter_mut().zip(&q.u) {
                *d += g[i][j] * u;
            }
        }
        encoder.backward(c, &du, &mut grad);
    }
    Ok((loss, grad))
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    pub learning_rate: f64,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    pub dim_out: usize,
    pub dim_feat: usize,
    #[serde(default = "default_init")]
    pub init: Init,
    #[serde(default)]
    pub chunking: ChunkingConfig,
}

fn default_scale() -> f64 {
    20.0
}
fn default_epochs() -> usize {
    2
}
fn default_warmup() -> f64 {
    0.10
}
fn default_init() -> Init {
    Init::Random
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            scale: default_scale(),
            epochs: default_epochs(),
            learning_rate: 1.0,
            warmup_fraction: default_warmup(),
            seed: 0,
            dim_out: 64,
            dim_feat: 1024,
            init: Init::Random,
            chunking: ChunkingConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale must be positive");
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1]");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        self.chunking.validate().map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }
}

/// Linearly warmed-up learning rate for 1-based `step` out of `total_steps`.
pub fn learning_rate_at(step: usize, total_steps: usize, warmup_fraction: f64, target: f64) -> f64 {
    let warmup = (warmup_fraction * total_steps as f64).ceil() as usize;
    if warmup == 0 {
        return target;
    }
    target * (step as f64 / warmup as f64).min(1.0)
}

/// One (query, positive, hard negatives) training triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub query_id: String,
    pub positive: String,
    #[serde(default)]
    pub hard_negatives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: ToyEncoder,
    pub trace: Vec<TraceRow>,
    /// Mean step loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// How documents are turned into token sequences for training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextView {
    pub fields: FieldSelection,
    pub analyzer: AnalyzerConfig,
}

impl Default for TextView {
    fn default() -> Self {
        Self { fields: FieldSelection::title_abstract(), analyzer: AnalyzerConfig::plain() }
    }
}

/// Mini-batch gradient descent with linear warm-up. Examples are reshuffled
/// every epoch from a generator seeded with `config.seed`.
pub fn train(
    examples: &[TrainExample],
    queries: &[Query],
    corpus: &Corpus,
    view: &TextView,
    config: &TrainConfig,
    regime: Regime,
) -> Result<TrainOutcome> {
    let init = ToyEncoder::initialize(config.init, config.dim_out, config.dim_feat, config.seed)?;
    train_from(init, examples, queries, corpus, view, config, regime)
}

/// As [`train`], starting from the given parameters.
pub fn train_from(
    mut encoder: ToyEncoder,
    examples: &[TrainExample],
    queries: &[Query],
    corpus: &Corpus,
    view: &TextView,
    config: &TrainConfig,
    regime: Regime,
) -> Result<TrainOutcome> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let query_text: HashMap<&str, &str> = queries.iter().map(|q| (q.query_id.as_str(), q.text.as_str())).collect();
    let mut query_tokens: HashMap<&str, Vec<String>> = HashMap::new();
    let mut doc_tokens: HashMap<String, Vec<String>> = HashMap::new();
    let tokenize_doc = |id: &str, cache: &mut HashMap<String, Vec<String>>| -> Result<()> {
        if cache.contains_key(id) {
            return Ok(());
        }
        let doc = corpus.get(id).ok_or_else(|| TrainError::UnknownDocument(id.to_string()))?;
        let text = compose_document_text(doc, &view.fields).map_err(|_| TrainError::EmptyText)?;
        cache.insert(doc.doc_id.clone(), analyze(&text, &view.analyzer).into_inner());
        Ok(())
    };
    for ex in examples {
        if ex.hard_negatives.contains(&ex.positive) {
            return Err(TrainError::PositiveAsNegative { query_id: ex.query_id.clone(), doc_id: ex.positive.clone() });
        }
        let (qid, text) = query_text
            .get_key_value(ex.query_id.as_str())
            .ok_or_else(|| TrainError::UnknownQuery(ex.query_id.clone()))?;
        query_tokens.insert(qid, analyze(text, &view.analyzer).into_inner());
        tokenize_doc(&ex.positive, &mut doc_tokens)?;
        for hn in &ex.hard_negatives {
            tokenize_doc(hn, &mut doc_tokens)?;
        }
    }

    let steps_per_epoch = examples.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(total_steps);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        for batch_idx in order.chunks(config.batch_size) {
            step += 1;
            let batch_examples: Vec<&TrainExample> = batch_idx.iter().map(|&i| &examples[i]).collect();
            let q: Vec<&[String]> = batch_examples.iter().map(|e| query_tokens[e.query_id.as_str()].as_slice()).collect();
            let p: Vec<&[String]> = batch_examples.iter().map(|e| doc_tokens[e.positive.as_str()].as_slice()).collect();
            let hn: Vec<&[String]> = batch_examples
                .iter()
                .flat_map(|e| e.hard_negatives.iter().map(|h| doc_tokens[h.as_str()].as_slice()))
                .collect();
            let batch = Batch { queries: &q, positives: &p, hard_negatives: &hn };
            let (loss, grad) = loss_gradient(&batch, &encoder, config.scale, &config.chunking, regime)?;
            let lr = learning_rate_at(step, total_steps, config.warmup_fraction, config.learning_rate);
            for (w, g) in encoder.weights.iter_mut().zip(&grad) {
                *w -= lr * g;
            }
            if encoder.weights.iter().any(|w| !w.is_finite()) {
                return Err(TrainError::NonFiniteInput("encoder weights after update"));
            }
            epoch_sum += loss;
            trace.push(TraceRow { epoch, step, lr, loss });
        }
        epoch_losses.push(epoch_sum / steps_per_epoch as f64);
        log::info!("epoch {epoch}: mean loss {:.6}", epoch_losses[epoch - 1]);
    }
    Ok(TrainOutcome { encoder, trace, epoch_losses })
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,step,lr,loss")?;
    for row in trace {
        writeln!(out, "{},{},{},{}", row.epoch, row.step, row.lr, row.loss)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"TOY1";

/// Same envelope as embedding files: magic `TOY1`, version, `dim_out` in the
/// `u32` slot, `dim_feat` in the `u64` slot, then the row-major weights as
/// little-endian `f64`.
pub fn write_checkpoint_to<W: Write>(encoder: &ToyEncoder, mut out: W) -> Result<()> {
    let dim_out = u32::try_from(encoder.dim_out).map_err(|_| TrainError::InvalidConfig("dim_out too large".into()))?;
    dense::write_header(&mut out, CHECKPOINT_MAGIC, dim_out, encoder.dim_feat as u64)?;
    for w in &encoder.weights {
        out.write_all(&w.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint_from(bytes: &[u8]) -> Result<ToyEncoder> {
    let mut r = dense::Reader::new(bytes);
    let (dim_out, dim_feat) = r.header(CHECKPOINT_MAGIC)?;
    let n = (dim_out as usize)
        .checked_mul(dim_feat as usize)
        .ok_or(TrainError::Checkpoint(DenseError::TruncatedFile("weights")))?;
    let raw = r.take(n.checked_mul(8).ok_or(DenseError::TruncatedFile("weights"))?, "weights")?;
    r.finish()?;
    let weights = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    ToyEncoder::from_weights(dim_out as usize, dim_feat as usize, weights)
}

pub fn write_checkpoint(encoder: &ToyEncoder, path: &Path) -> Result<()> {
    write_checkpoint_to(encoder, BufWriter::new(File::create(path)?))
}

pub fn read_checkpoint(path: &Path) -> Result<ToyEncoder> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    read_checkpoint_from(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_query_loss_is_zero() {
        assert_eq!(mnrl_loss(&[vec![0.3]], 20.0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_matrix_gives_log_n() {
        let sim = vec![vec![0.4; 4]; 4];
        assert!((mnrl_loss(&sim, 20.0).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_two_by_two() {
        let sim = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let expected = (-20f64).exp().ln_1p();
        assert!((expected - 2.061_153_620_314_381e-9).abs() < 1e-20);
        assert!((mnrl_loss(&sim, 20.0).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn hard_negative_variants() {
        let sim = vec![vec![0.9, 0.1], vec![0.2, 0.7]];
        assert_eq!(mnrl_loss_hn(&sim, 20.0).unwrap(), mnrl_loss(&sim, 20.0).unwrap());
        assert!((mnrl_loss_hn(&[vec![1.0, 1.0]], 20.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        let mut extended = sim.clone();
        for row in &mut extended {
            row.push(-1e6);
        }
        assert!((mnrl_loss_hn(&extended, 20.0).unwrap() - mnrl_loss(&sim, 20.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn loss_shape_errors() {
        assert!(matches!(mnrl_loss(&[vec![1.0, 0.0]], 20.0), Err(TrainError::NonSquareMatrix { .. })));
        assert!(matches!(mnrl_loss_hn(&[vec![1.0], vec![1.0]], 20.0), Err(TrainError::KLessThanN { .. })));
        assert!(matches!(mnrl_loss(&[vec![f64::NAN]], 20.0), Err(TrainError::NonFiniteInput(_))));
    }

    #[test]
    fn warmup_schedule() {
        let lr = |s| learning_rate_at(s, 100, 0.10, 2.0);
        assert_eq!(lr(5), 1.0);
        assert_eq!(lr(10), 2.0);
        assert_eq!(lr(50), 2.0);
        assert_eq!(learning_rate_at(1, 100, 0.0, 2.0), 2.0);
        // ceil: 10% of 15 steps is 2 warm-up steps
        assert_eq!(learning_rate_at(1, 15, 0.10, 2.0), 1.0);
    }

    #[test]
    fn encoder_output_is_unit_norm_and_deterministic() {
        let enc = ToyEncoder::random(16, 64, 9);
        for text in ["a", "the quick brown fox", "covid19 vaccine trial results"] {
            let v = enc.encode(text).unwrap();
            assert!((l2(&v) - 1.0).abs() < 1e-9);
            assert_eq!(v, enc.encode(text).unwrap());
        }
        assert!(matches!(enc.encode("  !!"), Err(TrainError::EmptyText)));
    }

    #[test]
    fn disjoint_texts_are_less_similar_than_self() {
        let enc = ToyEncoder::identity(256);
        let a = enc.encode("mitochondria membrane potential").unwrap();
        let b = enc.encode("stock market rally").unwrap();
        let self_sim = dot(&a, &a);
        assert!(dot(&a, &b) < self_sim);
    }

    #[test]
    fn checkpoint_round_trip() {
        let enc = ToyEncoder::random(3, 5, 1);
        let mut buf = Vec::new();
        write_checkpoint_to(&enc, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"TOY1");
        assert_eq!(read_checkpoint_from(&buf).unwrap(), enc);
        buf[1] = b'X';
        assert!(read_checkpoint_from(&buf).is_err());
    }

    #[test]
    fn single_example_batch_has_zero_gradient() {
        let enc = ToyEncoder::random(4, 16, 2);
        let q = vec!["alpha".to_string(), "beta".to_string()];
        let p = vec!["gamma".to_string()];
        let batch = Batch { queries: &[&q], positives: &[&p], hard_negatives: &[] };
        let (loss, grad) = loss_gradient(&batch, &enc, 20.0, &ChunkingConfig::default(), Regime::InBatch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hard_negative_regime_without_negatives_matches_in_batch() {
        let enc = ToyEncoder::random(4, 16, 3);
        let t = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        let (q1, q2, p1, p2) = (t("a b"), t("c d"), t("a x"), t("c y"));
        let batch = Batch { queries: &[&q1, &q2], positives: &[&p1, &p2], hard_negatives: &[] };
        let cfg = ChunkingConfig::default();
        let a = loss_gradient(&batch, &enc, 20.0, &cfg, Regime::InBatch).unwrap();
        let b = loss_gradient(&batch, &enc, 20.0, &cfg, Regime::InBatchPlusHardNegatives).unwrap();
        assert_eq!(a, b);
    }
}
