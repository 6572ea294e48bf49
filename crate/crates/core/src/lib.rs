//! Harvests Dublin Core metadata from OAI-PMH repositories, persists it as a
//! newline-delimited JSON corpus, and computes metadata quality metrics:
//! per-field completeness, value variant tables, length histograms, descriptor
//! and author statistics, plus controlled-vocabulary normalization.
//!
//! The crate is organized as a pipeline. [`oai_protocol`] speaks OAI-PMH 2.0
//! over HTTP and yields [`record_model::HarvestedRecord`] values,
//! [`corpus_store`] persists and reloads them, [`quality_metrics`] computes
//! the metric suite over a loaded [`corpus_store::Corpus`], [`normalization`]
//! maps raw values onto controlled vocabularies, and [`report`] renders
//! everything as CSV or Markdown. [`mock_provider`] is a self-contained
//! OAI-PMH data provider used for offline testing and fault injection.

pub mod corpus_store;
pub mod mock_provider;
pub mod normalization;
pub mod oai_protocol;
pub mod quality_metrics;
pub mod record_model;
pub mod report;

mod fold;

pub use fold::fold;
pub use record_model::{DcElement, DublinCoreRecord, HarvestedRecord, RecordHeader};
