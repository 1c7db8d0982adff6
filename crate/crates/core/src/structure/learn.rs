use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::structure::{
    pc_learn_with, pdag_to_dag, pdag_to_dag_or_fallback, sa_search, Dag, DiscreteData, EdgeConstraints, PcConfig,
    PcOutput, Schedule, ScoredNetwork,
};

/// Hybrid search settings: PC seeds simulated annealing over BDeu scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureConfig {
    pub pc: PcConfig,
    pub schedule: Schedule,
    /// Number of best distinct networks kept.
    pub k: usize,
    /// BDeu equivalent sample size.
    pub ess: f64,
    /// Edges `[parent, child]` that may not appear.
    pub forbidden: Vec<[String; 2]>,
    /// Edges `[parent, child]` that must appear; they are added to the
    /// initial graph.
    pub required: Vec<[String; 2]>,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            pc: PcConfig::default(),
            schedule: Schedule::default(),
            k: 10,
            ess: 1.0,
            forbidden: Vec::new(),
            required: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnedStructure {
    pub pc: PcOutput,
    /// The DAG handed to the annealer.
    pub init: Dag,
    /// Best distinct networks, best first.
    pub networks: Vec<ScoredNetwork>,
    pub warnings: Vec<String>,
}

/// PC on the data, a consistent extension of its output as the starting
/// point, then simulated annealing keeping the `k` best networks.
pub fn learn_structure(data: &DiscreteData, cfg: &StructureConfig, seed: u64) -> Result<LearnedStructure> {
    let pc = pc_learn_with(data, &cfg.pc)?;
    let mut warnings = pc.warnings.clone();
    let mut init = match pdag_to_dag(&pc.pdag) {
        Ok(g) => g,
        Err(_) => {
            warnings.push("PC output has no consistent extension; using a best-effort orientation".into());
            pdag_to_dag_or_fallback(&pc.pdag)
        }
    };
    let pairs = |list: &[[String; 2]]| -> Vec<(String, String)> {
        list.iter().map(|[a, b]| (a.clone(), b.clone())).collect()
    };
    let constraints = EdgeConstraints::from_names(&init, &pairs(&cfg.forbidden), &pairs(&cfg.required))?;
    for &(u, v) in &constraints.forbidden {
        init.remove_edge(u, v);
    }
    for &(u, v) in &constraints.required {
        if !init.has_edge(u, v) {
            init.remove_edge(v, u);
            if init.add_edge(u, v).is_err() {
                warnings.push("required edges conflict with the PC orientation; starting from them alone".into());
                init = Dag::new(init.nodes().to_vec(), &constraints.required)?;
                break;
            }
        }
    }
    let out = sa_search(data, &init, cfg.k, &cfg.schedule, seed, cfg.ess, &constraints)?;
    Ok(LearnedStructure {
        pc,
        init,
        networks: out.networks,
        warnings,
    })
}
