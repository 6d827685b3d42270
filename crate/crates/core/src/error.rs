use thiserror::Error;

use crate::contrastive::TrainError;
use crate::corpus::CorpusError;
use crate::dense::DenseError;
use crate::evaluation::EvalError;
use crate::rerank::RerankError;
use crate::run::RunError;
use crate::sparse::SparseError;
use crate::textproc::TextError;

/// Any error raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
