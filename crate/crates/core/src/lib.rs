//! Transductive zero-shot point-cloud segmentation with learnable geometric
//! primitives.
//!
//! Points are embedded by a small backbone, re-expressed as attention weights
//! over learnable primitive prototypes, and scored against per-class kernels
//! generated from class-name embeddings. Training sees labels of seen classes
//! only; points of held-out classes are present but unlabeled, and an
//! unknown-aware loss pushes them away from seen classes.
//!
//! Start from the runnable programs in `examples/` or the `primseg` binary.

pub mod cli;
pub mod error;
pub mod numerics;
pub mod objective;
pub mod pipeline;
pub mod reprs;
pub mod scenegen;
pub mod semantics;

pub use error::{Error, Result};
