//! Chunked document embeddings, mean+max pooling and exact cosine search.
//!
//! A document's token sequence is cut into overlapping windows, each window
//! is embedded by an [`EmbeddingProvider`], and the window vectors are
//! combined as `h = (mean_i f(c_i) + max_i f(c_i)) / 2`, component-wise.
//!
//! # Embedding file format
//!
//! Little-endian binary: magic `EMB1`, version `u8 = 1`, `dim: u32`,
//! `count: u64`, then `count` records of `id_len: u16`, the id as UTF-8 and
//! `dim` `f32` components. Records are written in ascending byte order of id.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Document;
use crate::hashing::{fnv1a64, unit_uniform};
use crate::run::{sort_ranking, ScoredDoc};
use crate::textproc::{analyze, compose_document_text, AnalyzerConfig, FieldSelection};

#[derive(Debug, Error)]
pub enum DenseError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot chunk an empty token sequence")]
    EmptyTokens,
    #[error("cannot pool an empty chunk list")]
    EmptyChunkList,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cosine is undefined for a zero vector{}", id.as_ref().map(|i| format!(" (`{i}`)")).unwrap_or_default())]
    ZeroVector { id: Option<String> },
    #[error("invalid chunking config: overlap {overlap} must be smaller than chunk size {chunk_size}")]
    InvalidChunking { chunk_size: usize, overlap: usize },
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("non-finite component in vector `{0}`")]
    NonFinite(String),
    #[error("duplicate embedding id `{0}`")]
    DuplicateId(String),
    #[error("search depth must be at least 1")]
    InvalidDepth,
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("file truncated while reading {0}")]
    TruncatedFile(&'static str),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("embedding id is not valid UTF-8")]
    InvalidId,
    #[error("embedding id of {0} bytes exceeds the 65535-byte limit")]
    IdTooLong(usize),
    #[error("no stored vector for chunk `{0}`")]
    MissingVector(String),
}

pub type Result<T> = std::result::Result<T, DenseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkingConfig {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self { chunk_size: 510, overlap: 50 }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 || self.overlap >= self.chunk_size {
            return Err(DenseError::InvalidChunking { chunk_size: self.chunk_size, overlap: self.overlap });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.chunk_size - self.overlap
    }
}

/// Overlapping windows starting at multiples of `chunk_size - overlap`.
/// The last window is the first one that reaches the final token.
pub fn chunk<'a>(tokens: &'a [String], config: &ChunkingConfig) -> Result<Vec<&'a [String]>> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(DenseError::EmptyTokens);
    }
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + config.chunk_size).min(tokens.len());
        chunks.push(&tokens[start..end]);
        if end == tokens.len() {
            return Ok(chunks);
        }
        start += config.stride();
    }
}

/// `(mean + max) / 2` over chunk vectors, component-wise.
pub fn pool_document(chunk_vectors: &[Vec<f32>]) -> Result<Vec<f32>> {
    let first = chunk_vectors.first().ok_or(DenseError::EmptyChunkList)?;
    let dim = first.len();
    if let Some(bad) = chunk_vectors.iter().find(|v| v.len() != dim) {
        return Err(DenseError::DimensionMismatch { expected: dim, found: bad.len() });
    }
    let m = chunk_vectors.len() as f64;
    let mut column = Vec::with_capacity(chunk_vectors.len());
    let pooled = (0..dim)
        .map(|j| {
            column.clear();
            column.extend(chunk_vectors.iter().map(|v| f64::from(v[j])));
            // summing in sorted order makes the result independent of chunk order
            column.sort_by(f64::total_cmp);
            let mean = column.iter().sum::<f64>() / m;
            let max = column[column.len() - 1];
            (0.5 * (mean + max)) as f32
        })
        .collect();
    Ok(pooled)
}

pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(DenseError::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(DenseError::ZeroVector { id: None });
    }
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

/// Maps a chunk of tokens to a fixed-dimension vector. The same chunk must
/// always map to the same vector for a given provider state.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed_chunk(&self, chunk: &[String]) -> Result<Vec<f32>>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed_chunk(&self, chunk: &[String]) -> Result<Vec<f32>> {
        (**self).embed_chunk(chunk)
    }
}

/// Deterministic provider: each token maps to a fixed pseudo-random vector
/// in `[-1, 1)^dim`, and a chunk is the mean of its token vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashProjection {
    pub dim: usize,
    pub seed: u64,
}

impl HashProjection {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut state = fnv1a64(token.as_bytes(), self.seed);
        (0..self.dim).map(|_| unit_uniform(&mut state)).collect()
    }
}

impl EmbeddingProvider for HashProjection {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_chunk(&self, chunk: &[String]) -> Result<Vec<f32>> {
        if chunk.is_empty() {
            return Err(DenseError::EmptyTokens);
        }
        let mut acc = vec![0.0f64; self.dim];
        for token in chunk {
            for (a, x) in acc.iter_mut().zip(self.token_vector(token)) {
                *a += x;
            }
        }
        let n = chunk.len() as f64;
        Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
    }
}

/// Key under which a [`FileBackedProvider`] looks up a chunk: hex SHA-256
/// of the chunk tokens joined by single spaces.
pub fn chunk_key(chunk: &[String]) -> String {
    hex::encode(Sha256::digest(chunk.join(" ").as_bytes()))
}

/// Provider backed by precomputed chunk vectors keyed by [`chunk_key`].
#[derive(Debug, Clone)]
pub struct FileBackedProvider {
    vectors: EmbeddingSet,
}

impl FileBackedProvider {
    pub fn new(vectors: EmbeddingSet) -> Self {
        Self { vectors }
    }

    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self::new(read_embeddings(path)?))
    }
}

impl EmbeddingProvider for FileBackedProvider {
    fn dim(&self) -> usize {
        self.vectors.dim()
    }

    fn embed_chunk(&self, chunk: &[String]) -> Result<Vec<f32>> {
        let key = chunk_key(chunk);
        self.vectors.get(&key).map(<[f32]>::to_vec).ok_or(DenseError::MissingVector(key))
    }
}

/// Embed an already-analyzed token sequence: chunk, embed each chunk, pool.
pub fn embed_tokens<P: EmbeddingProvider>(tokens: &[String], provider: &P, chunking: &ChunkingConfig) -> Result<Vec<f32>> {
    let vectors = chunk(tokens, chunking)?
        .into_iter()
        .map(|c| {
            let v = provider.embed_chunk(c)?;
            if v.len() != provider.dim() {
                return Err(DenseError::DimensionMismatch { expected: provider.dim(), found: v.len() });
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    pool_document(&vectors)
}

/// Embed free text (a query) through the same chunk and pool path as documents.
pub fn embed_text<P: EmbeddingProvider>(
    text: &str,
    analyzer: &AnalyzerConfig,
    provider: &P,
    chunking: &ChunkingConfig,
) -> Result<Vec<f32>> {
    embed_tokens(&analyze(text, analyzer), provider, chunking)
}

pub fn embed_document<P: EmbeddingProvider>(
    doc: &Document,
    fields: &FieldSelection,
    analyzer: &AnalyzerConfig,
    provider: &P,
    chunking: &ChunkingConfig,
) -> crate::Result<Vec<f32>> {
    let text = compose_document_text(doc, fields)?;
    Ok(embed_text(&text, analyzer, provider, chunking)?)
}

/// Id-addressed vectors of one fixed dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingSet {
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(DenseError::ZeroDimension);
        }
        Ok(Self { dim, entries: BTreeMap::new() })
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(DenseError::DimensionMismatch { expected: self.dim, found: vector.len() });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(DenseError::NonFinite(id));
        }
        if id.len() > usize::from(u16::MAX) {
            return Err(DenseError::IdTooLong(id.len()));
        }
        if self.entries.contains_key(&id) {
            return Err(DenseError::DuplicateId(id));
        }
        self.entries.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Exact top-`k` by cosine similarity, ties by ascending id.
pub fn search(set: &EmbeddingSet, query: &[f32], k: usize) -> Result<Vec<ScoredDoc>> {
    if k == 0 {
        return Err(DenseError::InvalidDepth);
    }
    if query.len() != set.dim() {
        return Err(DenseError::DimensionMismatch { expected: set.dim(), found: query.len() });
    }
    let mut scored = set
        .iter()
        .map(|(id, v)| match cosine(query, v) {
            Ok(s) => Ok(ScoredDoc::new(id, s)),
            Err(DenseError::ZeroVector { .. }) if query.iter().any(|&x| x != 0.0) => {
                Err(DenseError::ZeroVector { id: Some(id.to_string()) })
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    sort_ranking(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

// ---------------------------------------------------------------------------
// Binary envelope
// ---------------------------------------------------------------------------

pub const EMBEDDING_MAGIC: [u8; 4] = *b"EMB1";
pub const FORMAT_VERSION: u8 = 1;

pub(crate) fn write_header<W: Write>(out: &mut W, magic: [u8; 4], dim: u32, count: u64) -> std::io::Result<()> {
    out.write_all(&magic)?;
    out.write_all(&[FORMAT_VERSION])?;
    out.write_all(&dim.to_le_bytes())?;
    out.write_all(&count.to_le_bytes())
}

/// Cursor over an in-memory file image.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(DenseError::TruncatedFile(what))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    /// Parse magic, version, dim and count.
    pub(crate) fn header(&mut self, magic: [u8; 4]) -> Result<(u32, u64)> {
        let found = self.array::<4>("magic")?;
        if found != magic {
            return Err(DenseError::BadMagic { expected: magic, found });
        }
        let [version] = self.array::<1>("version")?;
        if version != FORMAT_VERSION {
            return Err(DenseError::UnsupportedVersion(version));
        }
        let dim = u32::from_le_bytes(self.array("dim")?);
        let count = u64::from_le_bytes(self.array("count")?);
        Ok((dim, count))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(DenseError::TrailingBytes(n)),
        }
    }
}

pub fn write_embeddings_to<W: Write>(set: &EmbeddingSet, mut out: W) -> Result<()> {
    let dim = u32::try_from(set.dim()).map_err(|_| DenseError::DimensionMismatch { expected: u32::MAX as usize, found: set.dim() })?;
    write_header(&mut out, EMBEDDING_MAGIC, dim, set.len() as u64)?;
    for (id, vector) in set.iter() {
        out.write_all(&(id.len() as u16).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
        for x in vector {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_embeddings_from(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut r = Reader::new(bytes);
    let (dim, count) = r.header(EMBEDDING_MAGIC)?;
    let mut set = EmbeddingSet::new(dim as usize)?;
    let mut previous: Option<&str> = None;
    for _ in 0..count {
        let id_len = u16::from_le_bytes(r.array("id length")?);
        let id = std::str::from_utf8(r.take(usize::from(id_len), "id")?).map_err(|_| DenseError::InvalidId)?;
        let raw = r.take(4 * dim as usize, "vector")?;
        let vector = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")))
            .collect();
        if previous.is_some_and(|p| p >= id) && !set.entries.contains_key(id) {
            log::warn!("embedding ids are not in ascending order at `{id}`");
        }
        set.insert(id, vector)?;
        previous = Some(id);
    }
    r.finish()?;
    Ok(set)
}

pub fn write_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    write_embeddings_to(set, BufWriter::new(File::create(path)?))
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    read_embeddings_from(&bytes)
}

/// Read a set and require a particular dimension.
pub fn read_embeddings_with_dim(path: &Path, expected: usize) -> Result<EmbeddingSet> {
    let set = read_embeddings(path)?;
    if set.dim() != expected {
        return Err(DenseError::DimensionMismatch { expected, found: set.dim() });
    }
    Ok(set)
}
