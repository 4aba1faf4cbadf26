//! Batch analysis of geotagged short-text posts for transportation equity
//! (diversity, equity, inclusion and accessibility) signals.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`corpus`]: parse NDJSON posts, bounding-box filter, dedup, clean, tokenize.
//! 2. [`relevance`]: two-stage keyword screen (DEI words, then transportation words).
//! 3. [`sentiment`]: lexicon valence sum normalized to a compound score in (-1, 1).
//! 4. [`topics`]: per-sentiment-segment LDA by collapsed Gibbs sampling, UMass-based K selection.
//! 5. [`ngram`]: bigram counts, chain-rule sequence probability, exchange word clustering.
//! 6. [`geodemo`]: point-in-polygon tract assignment, ACS join, demographic classes.
//! 7. [`report`]: sentiment/tract/demographic aggregates, GeoJSON overlays, report bundle.
//!
//! [`pipeline`] wires the stages together behind the `transit-deia` binary.

pub mod config;
pub mod corpus;
pub mod error;
pub mod geodemo;
pub mod ngram;
pub mod pipeline;
pub mod record;
pub mod relevance;
pub mod report;
pub mod sentiment;
pub mod synth;
pub mod topics;

pub use error::{Error, Result};

/// Version tag carried by every intermediate NDJSON record and the report.
pub const SCHEMA_VERSION: u32 = 1;

/// Crate version string.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
