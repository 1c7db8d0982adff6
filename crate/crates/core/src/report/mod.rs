//! Study configuration, the unified result bundle, figures and the
//! command implementations behind the binary.

mod bundle;
mod commands;
mod config;
mod svg;

pub use bundle::{sha256_hex, FailureRecord, NetworkRecord, Provenance, ResultBundle};
pub use commands::{
    cmd_estimate, cmd_learn_structure, cmd_render, cmd_simulate, oracle_effects, run_study, write_figures,
    EstimateRun, OracleEffect, OracleSidecar, RunStatus, SimulateOutput, StructureReport, EXIT_UNUSABLE,
};
pub use config::StudyConfig;
pub use svg::{fmt6, render_balance_svg, render_ci_overlap_svg};
