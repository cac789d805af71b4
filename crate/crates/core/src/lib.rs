//! Hybrid geospatial + semantic retrieval over bilingual toponym records,
//! with an extractive QA toolkit and the evaluation harness around it.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: record ingestion, validation and context assembly
//! - [`geo`]: haversine distance, bounding boxes and the KD-tree radius index
//! - [`semantic`]: embedding providers, the TVEC vector file and a flat inner-product index
//! - [`lexical`]: BM25 baseline
//! - [`hybrid`]: score fusion and the four ranking strategies
//! - [`qagen`]: SQuAD-style corpus generation
//! - [`reader`]: rule-based extractive reader, answer normalization, EM/F1
//! - [`eval`]: query generation, Recall@k/MRR, bootstrap intervals, method comparison
//! - [`engine`]: an immutable snapshot bundling the corpus with all indexes
//! - [`api`]: JSON wire types shared by the service, the client and the CLI

pub mod api;
pub mod config;
pub mod corpus;
pub mod engine;
mod error;
pub mod eval;
pub mod geo;
pub mod hybrid;
pub mod lexical;
pub mod qagen;
pub mod reader;
pub mod semantic;

pub use error::{Error, Result};
