//! Artifact IO for one stage: hashed reads, atomic writes and the
//! provenance manifest listing both.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PipelineError;

/// Provenance record written next to a stage's outputs. Contains no
/// timestamps so that identical inputs give identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    /// Input label to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partially written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| PipelineError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| PipelineError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| PipelineError::io(path, e))?;
    tmp.persist(path).map_err(|e| PipelineError::io(path, e.error))?;
    Ok(())
}

/// Tracks what one stage reads and writes.
///
/// Outputs are staged in memory and only land on disk in [`StageIo::commit`],
/// so a stage that fails part-way leaves its previous artifacts untouched.
#[derive(Debug)]
pub struct StageIo {
    stage: &'static str,
    config_hash: String,
    output_dir: PathBuf,
    data_root: PathBuf,
    inputs: BTreeMap<String, String>,
    pending: BTreeMap<PathBuf, Vec<u8>>,
}

impl StageIo {
    pub fn new(stage: &'static str, config_hash: String, output_dir: &Path, data_root: &Path) -> Self {
        Self {
            stage,
            config_hash,
            output_dir: output_dir.to_path_buf(),
            data_root: data_root.to_path_buf(),
            inputs: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn stage(&self) -> &'static str {
        self.stage
    }

    /// Path of an artifact inside the output directory.
    pub fn artifact(&self, relative: &str) -> PathBuf {
        self.output_dir.join(relative)
    }

    fn label(&self, path: &Path) -> String {
        if let Ok(rel) = path.strip_prefix(&self.output_dir) {
            return rel.to_string_lossy().replace('\\', "/");
        }
        if let Ok(rel) = path.strip_prefix(&self.data_root) {
            return format!("data:{}", rel.to_string_lossy().replace('\\', "/"));
        }
        path.to_string_lossy().into_owned()
    }

    /// Read an artifact produced by an earlier stage.
    pub fn read_artifact(&mut self, relative: &str, producer: &'static str) -> Result<Vec<u8>, PipelineError> {
        let path = self.artifact(relative);
        if !path.is_file() {
            return Err(PipelineError::MissingArtifact { path, stage: producer });
        }
        self.read_file(&path)
    }

    /// Read an external input file such as a corpus or a sidecar output.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, PipelineError> {
        if !path.is_file() {
            return Err(PipelineError::Data(format!("input file {} does not exist", path.display())));
        }
        self.read_file(path)
    }

    fn read_file(&mut self, path: &Path) -> Result<Vec<u8>, PipelineError> {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
        self.inputs.insert(self.label(path), sha256_hex(&bytes));
        Ok(bytes)
    }

    /// Stage an output; nothing is written until [`StageIo::commit`].
    pub fn write(&mut self, relative: &str, bytes: Vec<u8>) {
        self.pending.insert(self.artifact(relative), bytes);
    }

    /// Atomically write every staged output and then the manifest.
    pub fn commit(self) -> Result<Manifest, PipelineError> {
        let mut outputs = BTreeMap::new();
        for (path, bytes) in &self.pending {
            outputs.insert(self.label(path), sha256_hex(bytes));
        }
        let manifest = Manifest {
            stage: self.stage.to_string(),
            config_hash: self.config_hash.clone(),
            inputs: self.inputs.clone(),
            outputs,
        };
        for (path, bytes) in &self.pending {
            write_atomic(path, bytes)?;
        }
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        write_atomic(&self.artifact(&format!("manifests/{}.json", self.stage)), &json)?;
        log::info!("{}: wrote {} artifact(s)", self.stage, self.pending.len());
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_outputs_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        std::fs::create_dir_all(&data).unwrap();
        std::fs::write(data.join("in.txt"), b"hello").unwrap();
        let out = dir.path().join("out");
        let mut io = StageIo::new("demo", "abc".into(), &out, &data);
        io.read_input(&data.join("in.txt")).unwrap();
        io.write("sub/result.txt", b"world".to_vec());
        assert!(!out.join("sub/result.txt").exists());
        let m = io.commit().unwrap();
        assert_eq!(std::fs::read(out.join("sub/result.txt")).unwrap(), b"world");
        assert_eq!(m.inputs["data:in.txt"], sha256_hex(b"hello"));
        assert_eq!(m.outputs["sub/result.txt"], sha256_hex(b"world"));
        let on_disk: Manifest = serde_json::from_slice(&std::fs::read(out.join("manifests/demo.json")).unwrap()).unwrap();
        assert_eq!(on_disk, m);
    }

    #[test]
    fn missing_artifact_names_producer() {
        let dir = tempfile::tempdir().unwrap();
        let mut io = StageIo::new("evaluate", String::new(), dir.path(), dir.path());
        let err = io.read_artifact("runs/bm25.dev.trec", "sparse-retrieve").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("runs/bm25.dev.trec"));
    }
}
