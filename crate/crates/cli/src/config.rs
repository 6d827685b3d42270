//! Pipeline configuration: one JSON document, unknown keys rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evidence_core::contrastive::{Init, Regime, TrainConfig};
use evidence_core::corpus::Split;
use evidence_core::dense::ChunkingConfig;
use evidence_core::rerank::RerankConfig;
use evidence_core::sparse::Bm25Params;
use evidence_core::textproc::{parse_stopwords, AnalyzerConfig, FieldSelection};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PipelineError;

/// Environment variable naming the root that relative data paths resolve against.
pub const DATA_ROOT_ENV: &str = "EVIDENCE_PIPELINE_DATA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataPaths,
    /// Where every stage writes its artifacts.
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Splits that are retrieved and evaluated.
    #[serde(default = "default_eval_splits")]
    pub eval_splits: Vec<Split>,
    #[serde(default)]
    pub fields: FieldSelection,
    #[serde(default)]
    pub sparse: SparseSettings,
    #[serde(default)]
    pub negatives: NegativeSettings,
    #[serde(default)]
    pub dense: DenseSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub rerank: RerankSettings,
    #[serde(default)]
    pub evaluate: EvaluateSettings,
}

fn default_eval_splits() -> Vec<Split> {
    vec![Split::Dev, Split::Test]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    /// Documents, TSV or JSONL by extension.
    pub corpus: PathBuf,
    /// Query file per split.
    pub queries: BTreeMap<Split, PathBuf>,
    /// Gold pairs for all splits in one file.
    pub gold: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzerPreset {
    /// Split on whitespace, nothing else.
    Whitespace,
    /// Lowercase and split on non-alphanumerics.
    Plain,
    /// Plain plus stopword removal and stemming.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSettings {
    pub preset: AnalyzerPreset,
    /// Replaces the bundled stopword list in `full` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords_file: Option<PathBuf>,
}

impl AnalyzerSettings {
    pub fn preset(preset: AnalyzerPreset) -> Self {
        Self { preset, stopwords_file: None }
    }

    pub fn build(&self, data_root: &Path) -> Result<AnalyzerConfig, PipelineError> {
        let base = match self.preset {
            AnalyzerPreset::Whitespace => AnalyzerConfig::whitespace(),
            AnalyzerPreset::Plain => AnalyzerConfig::plain(),
            AnalyzerPreset::Full => AnalyzerConfig::full(),
        };
        let Some(path) = &self.stopwords_file else {
            return Ok(base);
        };
        if self.preset != AnalyzerPreset::Full {
            return Err(PipelineError::Config("stopwords_file needs the `full` analyzer preset".into()));
        }
        let path = resolve(data_root, path);
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        let words = parse_stopwords(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        base.with_stopwords(words).map_err(|e| PipelineError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseSettings {
    pub analyzer: AnalyzerSettings,
    pub bm25: Bm25Params,
    /// Candidates kept per query.
    pub depth: usize,
}

impl Default for SparseSettings {
    fn default() -> Self {
        Self { analyzer: AnalyzerSettings::preset(AnalyzerPreset::Whitespace), bm25: Bm25Params::default(), depth: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeSettings {
    /// BM25 list depth searched for hard negatives.
    pub pool_depth: usize,
    /// Hard negatives kept per training query.
    pub count: usize,
}

impl Default for NegativeSettings {
    fn default() -> Self {
        Self { pool_depth: 10, count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderSettings {
    /// The toy encoder trained by `train-toy`.
    Toy,
    /// Untrained seeded random projection of token hashes.
    Hash { dim: usize },
    /// Pooled vectors produced by an external encoder, one file for
    /// documents and one per split for queries.
    Files { documents: PathBuf, queries: BTreeMap<Split, PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseSettings {
    pub analyzer: AnalyzerSettings,
    pub chunking: ChunkingConfig,
    pub provider: ProviderSettings,
    pub depth: usize,
}

impl Default for DenseSettings {
    fn default() -> Self {
        Self {
            analyzer: AnalyzerSettings::preset(AnalyzerPreset::Plain),
            chunking: ChunkingConfig::default(),
            provider: ProviderSettings::Toy,
            depth: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub scale: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub dim_out: usize,
    pub dim_feat: usize,
    pub init: Init,
    pub regime: Regime,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            batch_size: 16,
            scale: 20.0,
            epochs: 2,
            learning_rate: 1.0,
            warmup_fraction: 0.10,
            dim_out: 128,
            dim_feat: 2048,
            init: Init::Random,
            regime: Regime::InBatchPlusHardNegatives,
        }
    }
}

impl TrainSettings {
    pub fn to_train_config(&self, seed: u64, chunking: ChunkingConfig) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            scale: self.scale,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            warmup_fraction: self.warmup_fraction,
            seed,
            dim_out: self.dim_out,
            dim_feat: self.dim_feat,
            init: self.init,
            chunking,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunName {
    Bm25,
    Dense,
    Rerank,
}

impl RunName {
    pub fn as_str(self) -> &'static str {
        match self {
            RunName::Bm25 => "bm25",
            RunName::Dense => "dense",
            RunName::Rerank => "rerank",
        }
    }

    /// The stage that writes this run.
    pub fn producer(self) -> &'static str {
        match self {
            RunName::Bm25 => "sparse-retrieve",
            RunName::Dense => "dense-retrieve",
            RunName::Rerank => "rerank",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerSettings {
    /// Token-set overlap between query and document.
    Overlap { analyzer: AnalyzerSettings },
    /// Pre-computed pair scores (query, doc, score TSV) per split.
    Table { paths: BTreeMap<Split, PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankSettings {
    /// First-stage run whose heads are re-ordered.
    pub input: RunName,
    /// Head length re-scored per query.
    pub depth: usize,
    pub scorer: ScorerSettings,
}

impl Default for RerankSettings {
    fn default() -> Self {
        Self {
            input: RunName::Dense,
            depth: RerankConfig::default().depth,
            scorer: ScorerSettings::Overlap { analyzer: AnalyzerSettings::preset(AnalyzerPreset::Full) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSettings {
    pub runs: Vec<RunName>,
    /// Ordered pairs `(a, b)`; deltas are reported as `b − a`.
    pub comparisons: Vec<(RunName, RunName)>,
    /// Deepest rank with its own histogram bucket.
    pub histogram_max_rank: usize,
}

impl RerankSettings {
    pub fn rerank_config(&self) -> RerankConfig {
        RerankConfig { depth: self.depth, ..RerankConfig::default() }
    }
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        Self {
            runs: vec![RunName::Bm25, RunName::Dense, RunName::Rerank],
            comparisons: vec![(RunName::Bm25, RunName::Dense), (RunName::Dense, RunName::Rerank)],
            histogram_max_rank: 10,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let config: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.eval_splits.is_empty() {
            return bad("eval_splits must name at least one split".into());
        }
        for split in &self.eval_splits {
            if !self.data.queries.contains_key(split) {
                return bad(format!("eval split `{split}` has no query file in data.queries"));
            }
        }
        self.sparse.bm25.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.sparse.depth == 0 || self.dense.depth == 0 {
            return bad("retrieval depth must be at least 1".into());
        }
        if self.negatives.count == 0 || self.negatives.pool_depth == 0 {
            return bad("negatives.count and negatives.pool_depth must be at least 1".into());
        }
        self.dense.chunking.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if let ProviderSettings::Hash { dim: 0 } = self.dense.provider {
            return bad("hash provider dim must be positive".into());
        }
        self.train
            .to_train_config(self.seed, self.dense.chunking)
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.rerank.depth == 0 {
            return bad("rerank depth must be at least 1".into());
        }
        if self.rerank.input == RunName::Rerank {
            return bad("rerank input must be a first-stage run".into());
        }
        if self.evaluate.histogram_max_rank == 0 {
            return bad("histogram_max_rank must be at least 1".into());
        }
        Ok(())
    }

    /// Hash of the canonical JSON form, recorded in every manifest. The
    /// output directory is left out because it does not affect any artifact.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Relative paths are taken relative to `root`.
pub fn resolve(root: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        root.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "data": {"corpus": "c.tsv", "queries": {"dev": "d.tsv", "test": "t.tsv"}, "gold": "g.tsv"},
        "output_dir": "out"
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = PipelineConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.sparse.bm25.k1, 1.5);
        assert_eq!(c.rerank.depth, 10);
        assert_eq!(c.eval_splits, vec![Split::Dev, Split::Test]);
        assert_eq!(c.train.epochs, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = MINIMAL.replace("\"output_dir\"", "\"outptu_dir\": \"x\", \"output_dir\"");
        assert!(matches!(PipelineConfig::from_json(&typo), Err(PipelineError::Config(_))));
        let nested = MINIMAL.replace("\"output_dir\": \"out\"", "\"output_dir\": \"out\", \"sparse\": {\"analyzer\": {\"preset\": \"full\"}, \"bm25\": {\"k1\": 1.2, \"b\": 0.75, \"kk\": 1}, \"depth\": 10}");
        assert!(PipelineConfig::from_json(&nested).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let bad = MINIMAL.replace("\"output_dir\": \"out\"", "\"output_dir\": \"out\", \"eval_splits\": [\"train\"]");
        assert!(matches!(PipelineConfig::from_json(&bad), Err(PipelineError::Config(_))));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = PipelineConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 9;
        assert_ne!(a.hash(), b.hash());
    }
}
