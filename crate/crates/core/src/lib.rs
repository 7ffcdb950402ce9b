//! Territorial mapping of the supply of new scientific knowledge.
//!
//! The pipeline stages, in order:
//!
//! 1. [`corpus`] — load and validate publications, journals, subject
//!    categories and the territory registry.
//! 2. [`reconcile`] — resolve raw affiliation strings to institutions and
//!    hence to provinces/regions via a controlled-vocabulary rule engine.
//! 3. [`impact`] — compute national citation baselines per (year, category)
//!    stratum and the citation-standardized impact index of every
//!    publication.
//! 4. [`strength`] — aggregate fractional impact into scientific strength
//!    per (territory, category), plus per-capita and per-GDP
//!    standardizations.
//! 5. [`concentration`] — Gini coefficients, leading-territory rankings and
//!    prevalent-category lists.
//! 6. [`report`] / [`choropleth`] / [`pipeline`] — CSV table emission, SVG
//!    map rendering and end-to-end orchestration.

pub mod choropleth;
pub mod concentration;
pub mod corpus;
pub mod impact;
pub mod pipeline;
pub mod reconcile;
pub mod report;
pub mod strength;

pub use corpus::{Corpus, CorpusError};
