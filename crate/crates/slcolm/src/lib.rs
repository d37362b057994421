//! Train-guide-predict model collaboration for entity-relation extraction.
//!
//! A fine-tuned small model produces per-sample predictions with
//! probabilities; those predictions are folded into prompts (demonstrations,
//! task description, candidate relation definitions, the target sentence)
//! that guide a large model, whose explanation-plus-triples answer is parsed
//! and fused with the small model's output under several merge modes. The
//! result is scored at the triple level with micro/macro P/R/F1, per-relation
//! tables, and long-tail breakdowns.
//!
//! The crate is organized along the pipeline stages:
//!
//! - [`types`]: samples, triples, predictions, the relation schema
//! - [`ingest`]: file formats, validation, dataset statistics
//! - [`fixture`]: synthetic long-tail corpora with a scripted SLM
//! - [`retrieval`]: character-bigram cosine similarity, demo selection
//! - [`candidates`]: candidate relation selection and coverage rates
//! - [`prompt`] / [`parse`]: prompt assembly and answer parsing
//! - [`llm`]: OpenAI-compatible client, response cache, scripted mock
//! - [`merge`]: the five fusion modes and worst-relation ranking
//! - [`eval`]: scoring and reports
//! - [`pipeline`]: the end-to-end runner, ablation grid, and statistics

pub mod candidates;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod ingest;
pub mod llm;
pub mod merge;
pub mod parse;
pub mod pipeline;
pub mod prompt;
pub mod retrieval;
pub mod types;

pub use error::{Error, Result};
