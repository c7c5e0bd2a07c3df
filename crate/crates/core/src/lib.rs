//! Training-data attribution for generative text models.
//!
//! The crate is organised bottom-up:
//!
//! - [`store`]: the on-disk gradient cache (binary shards plus a JSON manifest)
//! - [`engine`]: influence kernels (closed-form iHVP scores, TracIn), median
//!   aggregation, ranking and histograms
//! - [`corpus`]: training documents, snippets and TF-IDF keywords
//! - [`diff`]: word-level edit scripts between generated and edited text
//! - [`service`]: sessions, preprocessing, attribution and comparison
//! - [`toy`]: a convex softmax-regression model with a shuffle-and-checkpoint
//!   trainer, a reference gradient provider and independent oracles
//!
//! With the `parallel` feature (default) scoring fans out across checkpoints
//! and layers on the rayon pool. Each layer is always accumulated sequentially
//! in example order, so results are bitwise identical with or without it.

pub mod corpus;
pub mod diff;
pub mod engine;
pub mod error;
pub mod parallel;
pub mod service;
pub mod store;
pub mod toy;

pub use error::{Error, Result};
