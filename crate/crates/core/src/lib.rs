//! Evidence retrieval engine for linking short informal posts to the
//! scientific documents they implicitly reference.
//!
//! The pipeline has two stages. A first stage produces candidate lists,
//! either lexically ([`sparse`], Okapi BM25) or densely ([`dense`], pooled
//! chunk embeddings searched by cosine). A second stage ([`rerank`])
//! re-orders the head of each list with a pluggable pair scorer. Runs are
//! scored and compared with [`evaluation`].
//!
//! [`contrastive`] trains a small linear dual encoder with the
//! in-batch-negatives ranking loss (optionally extended with mined hard
//! negatives) so the dense stage can be exercised end to end without
//! transformer weights.

pub mod contrastive;
pub mod corpus;
pub mod dense;
pub mod evaluation;
pub mod rerank;
pub mod run;
pub mod sparse;
pub mod synthetic;
pub mod textproc;

mod error;
mod hashing;

pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;
