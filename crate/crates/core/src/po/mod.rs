//! Propensity-score estimation of average causal effects: boosted propensity
//! models with balance-driven stage selection, inverse-probability weights,
//! balance diagnostics, a greedy matching baseline, weighted outcome models
//! and bootstrap intervals.

mod balance;
mod estimate;
mod matching;
mod outcome;
mod propensity;

pub use balance::{balance_table, weighted_ks, BalanceRow, BALANCE_ALPHA, DEFAULT_PERMUTATIONS};
pub use estimate::{
    bootstrap_ci, bootstrap_replicates, estimate_po, ipw_balance, ipw_pipeline, match_pipeline, percentile_intervals,
    AceEstimate, BalanceReport, Comparison, Method, PipelineOutput, PoConfig,
};
pub use matching::{greedy_match, match_pairs, MatchResult, DEFAULT_CALIPER};
pub use outcome::{ace_combined, ace_individual, fit_outcome_model, OutcomeModel};
pub use propensity::{fit_propensity, ipw_weights, PropensityFit};
