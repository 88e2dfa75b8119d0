//! Diversity-driven active-learning queries over vision-language embeddings.
//!
//! The crate is organised as a pipeline:
//!
//! * [`embedding_store`] loads and validates embedding sets (the `VLED`
//!   container) and joins them with a sample → scene manifest.
//! * [`zeroshot`] assigns each image embedding to one closed-set class by
//!   maximum dot product against text-label embeddings.
//! * [`clustering`] builds an exact average-linkage dendrogram under cosine
//!   distance and cuts it into flat clusters.
//! * [`sampler`] turns flat clusters into scene selections: smallest clusters
//!   first (open-world exploring), per-class quotas (closed-world mining), and
//!   random / externally scored baselines.
//! * [`pool_manager`] tracks the labeled pool across rounds and keeps an
//!   append-only, replayable ledger.
//! * [`harness`] generates synthetic worlds with controlled class proportions
//!   and measures selection composition over rounds.
//!
//! [`query`] wires the stages together for a single acquisition round.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod embedding_store;
pub mod error;
pub mod harness;
pub mod pool_manager;
pub mod query;
pub mod sampler;
pub mod seed;
pub mod zeroshot;

pub use error::{Error, ErrorKind, Result};
