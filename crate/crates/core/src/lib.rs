//! Table retrieval toolkit.
//!
//! Builds question-augmented table corpora for retrieval: tables are cut down
//! to partial tables (top-k rows or a token budget), serialized to markdown,
//! and optionally enriched with LLM-generated synthetic questions, headers, or
//! descriptions before embedding. Retrieval runs against either a dense
//! IVF-Flat index (inner product over normalized vectors) or an exhaustive
//! late-interaction MaxSim scorer, and is scored with Recall@k.
//!
//! The pipeline is split into stages that mirror the crate's modules:
//!
//! - [`table`]: table model, partial-table selection, markdown serialization
//! - [`corpus`]: ingestion, schema-based deduplication, corpus files
//! - [`qgen`]: prompt construction, generation, strict JSON parsing, augmentation
//! - [`embed`]: dense and multi-vector embedding providers (mock and remote)
//! - [`index`]: brute-force, IVF-Flat, and MaxSim search
//! - [`eval`]: Recall@k reports and the query-decomposition baseline
//!
//! Everything runs offline with the deterministic mock providers; remote
//! providers speak OpenAI-compatible HTTP.

pub mod cache;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod index;
pub mod provider;
pub mod qgen;
pub mod rng;
pub mod table;
pub mod tokenize;
