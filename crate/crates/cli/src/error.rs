//! Pipeline errors and their process exit codes.

use std::path::{Path, PathBuf};

use evidence_core::contrastive::TrainError;
use evidence_core::corpus::CorpusError;
use evidence_core::dense::DenseError;
use evidence_core::evaluation::EvalError;
use evidence_core::rerank::RerankError;
use evidence_core::run::RunError;
use evidence_core::sparse::SparseError;
use evidence_core::textproc::TextError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing artifact {}: run `{stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("{0}")]
    Data(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }

    pub fn data(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        PipelineError::Data(format!("{context}: {err}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::MissingArtifact { .. } => 3,
            PipelineError::Data(_) | PipelineError::Io { .. } => 4,
            PipelineError::Invariant(_) => 5,
        }
    }
}

impl From<evidence_core::Error> for PipelineError {
    fn from(e: evidence_core::Error) -> Self {
        use evidence_core::Error as E;
        match e {
            E::Corpus(e) => e.into(),
            E::Text(e) => e.into(),
            E::Sparse(e) => e.into(),
            E::Dense(e) => e.into(),
            E::Train(e) => e.into(),
            E::Rerank(e) => e.into(),
            E::Run(e) => e.into(),
            E::Eval(e) => e.into(),
        }
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<TextError> for PipelineError {
    fn from(e: TextError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<SparseError> for PipelineError {
    fn from(e: SparseError) -> Self {
        match e {
            SparseError::InvalidParams(_) | SparseError::InvalidDepth => PipelineError::Config(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<DenseError> for PipelineError {
    fn from(e: DenseError) -> Self {
        match e {
            DenseError::InvalidChunking { .. } | DenseError::ZeroDimension | DenseError::InvalidDepth => {
                PipelineError::Config(e.to_string())
            }
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for PipelineError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) => PipelineError::Config(e.to_string()),
            TrainError::NonSquareMatrix { .. } | TrainError::KLessThanN { .. } | TrainError::RaggedMatrix => {
                PipelineError::Invariant(e.to_string())
            }
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<RerankError> for PipelineError {
    fn from(e: RerankError) -> Self {
        match e {
            RerankError::InvalidDepth => PipelineError::Config(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<RunError> for PipelineError {
    fn from(e: RunError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvariantViolation(_) => PipelineError::Invariant(e.to_string()),
            EvalError::InvalidCutoff => PipelineError::Config(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 2);
        let missing = PipelineError::MissingArtifact { path: "runs/bm25.dev.trec".into(), stage: "sparse-retrieve" };
        assert_eq!(missing.exit_code(), 3);
        assert!(missing.to_string().contains("sparse-retrieve"));
        assert_eq!(PipelineError::from(EvalError::EmptyRun).exit_code(), 4);
        assert_eq!(PipelineError::from(EvalError::InvariantViolation("x".into())).exit_code(), 5);
        assert_eq!(PipelineError::from(SparseError::InvalidDepth).exit_code(), 2);
    }
}
