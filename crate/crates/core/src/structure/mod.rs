//! Graph structure: DAGs and PDAGs, d-separation, the G² independence test,
//! PC search, BDeu scoring and simulated-annealing score search.

mod anneal;
mod bdeu;
mod citest;
mod dag;
mod discrete;
mod dsep;
mod learn;
mod pc;
mod pdag;

pub use anneal::{sa_search, EdgeConstraints, Schedule, ScoredNetwork, SearchOutput};
pub use bdeu::{bdeu_score, family_score, BdeuScorer, DEFAULT_CONFIG_CAP};
pub use citest::{g2_from_counts, g2_test, G2Result};
pub use dag::{Dag, DagRecord};
pub use discrete::DiscreteData;
pub use dsep::{d_separated, d_separated_names};
pub use learn::{learn_structure, LearnedStructure, StructureConfig};
pub use pc::{apply_meek_rules, pc_learn, pc_learn_with, PcConfig, PcOutput};
pub use pdag::{pdag_to_dag, pdag_to_dag_or_fallback, Pdag, PdagRecord};
