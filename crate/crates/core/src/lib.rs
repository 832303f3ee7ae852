//! Text drift detection against a training corpus.
//!
//! Documents are cleaned ([`corpus`]), embedded ([`embeddings`]) and scored
//! by a density model fitted on the training embeddings ([`density`]). A
//! [`detector::TrainedPipeline`] bundles the three and turns scores into
//! drift verdicts. [`explain`] attributes a verdict to individual words and
//! [`syntax_stats`] compares corpora at the level of POS patterns, sentence
//! rules, named entities, dependencies and phrase chunks. [`eval`] measures
//! detection accuracy on in- and out-of-distribution corpora.

pub mod corpus;
pub mod density;
pub mod detector;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod explain;
pub mod syntax_stats;

pub use error::{Error, Result};
