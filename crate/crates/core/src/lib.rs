//! Average causal effects from observational tables, estimated two ways:
//! propensity-score weighting with boosted trees, and discrete causal
//! Bayesian networks with interventions computed by exact inference.

pub mod boost;
pub mod data;
pub mod error;
pub mod inference;
pub mod oracle;
pub mod po;
pub mod report;
pub mod rng;
pub mod stats;
pub mod structure;

pub use error::{Error, Result};
