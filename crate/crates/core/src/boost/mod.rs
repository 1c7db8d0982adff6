//! Gradient-boosted regression trees for binary targets.

mod features;
mod model;
mod tree;

pub use features::{Feature, FeatureMatrix, FeatureSpec};
pub use model::{argmin_first, clamp_prob, fit, logistic, BoostConfig, BoostModel, P_MIN};
pub use tree::{Node, Rule};
