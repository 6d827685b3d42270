//! Command-line orchestration of the two-stage retrieval pipeline.
//!
//! One JSON config drives every stage. Stages communicate only through
//! artifacts in the output directory, and each stage writes a manifest
//! recording the config hash and the hashes of everything it read and
//! wrote.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;
pub mod study;

use std::path::{Path, PathBuf};

use evidence_core::corpus::{self, Format, Split};
use evidence_core::synthetic::{generate, SyntheticConfig};

pub use config::PipelineConfig;
pub use error::PipelineError;
pub use stages::{Pipeline, Stage};

use crate::config::{resolve, DATA_ROOT_ENV};
use crate::manifest::write_atomic;

/// Load a config file and bind it to directories.
///
/// Relative data paths resolve against `$EVIDENCE_PIPELINE_DATA` when set,
/// otherwise against the config file's directory. A relative output
/// directory always resolves against the config file's directory.
pub fn open_pipeline(config_path: &Path, seed: Option<u64>) -> Result<Pipeline, PipelineError> {
    let mut config = PipelineConfig::load(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
        config.validate()?;
    }
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let data_root = match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root),
        _ => base.clone(),
    };
    let output_dir = resolve(&base, &config.output_dir);
    Ok(Pipeline::new(config, data_root, output_dir))
}

/// Write a synthetic collection as `corpus.tsv`, `queries.<split>.tsv` and
/// `gold.tsv` under `dir`.
pub fn write_synthetic(dir: &Path, config: &SyntheticConfig) -> Result<(), PipelineError> {
    let c = generate(config);
    let mut buf = Vec::new();
    corpus::write_corpus(&mut buf, &c.corpus, Format::Tsv)?;
    write_atomic(&dir.join("corpus.tsv"), &buf)?;
    for split in Split::ALL {
        let mut buf = Vec::new();
        corpus::write_queries(&mut buf, &c.queries_in(split), Format::Tsv)?;
        write_atomic(&dir.join(format!("queries.{split}.tsv")), &buf)?;
    }
    let mut buf = Vec::new();
    corpus::write_gold(&mut buf, &c.gold, Format::Tsv)?;
    write_atomic(&dir.join("gold.tsv"), &buf)?;
    Ok(())
}
