//! Analytics over structured print-newspaper extraction records.
//!
//! The crate ingests page records (one JSON object per page), classifies ads
//! and articles with keyword rules, prices ads against a rate card, computes
//! placement and size statistics, and fits fixed-effects panel regressions of
//! coverage on advertising with entity-clustered standard errors.

pub mod classify;
pub mod error;
pub mod ingest;
pub mod layout;
pub mod metrics;
pub mod model;
pub mod panel;
pub mod pipeline;
pub mod pricing;
pub mod synth;

pub use error::{Error, Result};
