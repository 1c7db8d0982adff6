//! Fully specified generating networks: ancestral sampling and brute-force
//! enumeration of observational and interventional quantities.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset, Role, Schema, VariableSpec};
use crate::error::{Error, Result};
use crate::inference::{CptSet, NodeCpt};
use crate::rng::substream;
use crate::structure::Dag;

/// Cap on the number of joint configurations enumerated.
pub const JOINT_CAP: usize = 10_000_000;

const BLOCK_ROWS: usize = 4096;

const DEFAULT_TRUTH: &str = include_str!("../assets/default_truth.json");

/// A generating network with a designated treatment and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub graph: Dag,
    pub cpts: CptSet,
    pub treatment: String,
    pub outcome: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TruthRecord {
    treatment: String,
    outcome: String,
    seed: u64,
    nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeRecord {
    name: String,
    levels: Vec<String>,
    #[serde(default)]
    parents: Vec<String>,
    /// One row per parent configuration, first parent most significant.
    cpt: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn new(graph: Dag, cpts: CptSet, treatment: &str, outcome: &str, seed: u64) -> Result<Self> {
        let gt = GroundTruth {
            cpts: CptSet::new(&graph, cpts.nodes().to_vec())?,
            graph,
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
            seed,
        };
        let t = gt.graph.node(treatment)?;
        let s = gt.graph.node(outcome)?;
        if t == s {
            return Err(Error::Invalid("treatment and outcome must differ".into()));
        }
        Ok(gt)
    }

    /// The bundled five-node confounded network.
    pub fn default_truth() -> Self {
        Self::from_json(DEFAULT_TRUTH).expect("bundled ground truth is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: TruthRecord = serde_json::from_str(text)?;
        let names: Vec<String> = rec.nodes.iter().map(|n| n.name.clone()).collect();
        let mut edges = Vec::new();
        for (v, node) in rec.nodes.iter().enumerate() {
            for p in &node.parents {
                let u = names
                    .iter()
                    .position(|x| x == p)
                    .ok_or_else(|| Error::UnknownNode(p.clone()))?;
                edges.push((u, v));
            }
        }
        let graph = Dag::new(names, &edges)?;
        let mut cpts = Vec::with_capacity(rec.nodes.len());
        for (v, node) in rec.nodes.iter().enumerate() {
            // rows follow the listed parent order; re-index to ascending parents
            let listed: Vec<usize> = node.parents.iter().map(|p| graph.node(p)).collect::<Result<_>>()?;
            let cards: Vec<usize> = listed.iter().map(|&p| rec.nodes[p].levels.len()).collect();
            let q: usize = cards.iter().product();
            if node.cpt.len() != q {
                return Err(Error::Invalid(format!("`{}` needs {q} rows, found {}", node.name, node.cpt.len())));
            }
            let sorted = graph.parents(v).to_vec();
            let r = node.levels.len();
            let mut probs = vec![0.0; q * r];
            let mut config = vec![0usize; listed.len()];
            for row in &node.cpt {
                if row.len() != r {
                    return Err(Error::Invalid(format!("`{}` rows must have {r} entries", node.name)));
                }
                let mut j = 0;
                for &p in &sorted {
                    let pos = listed.iter().position(|&x| x == p).expect("same parent set");
                    j = j * cards[pos] + config[pos];
                }
                probs[j * r..(j + 1) * r].copy_from_slice(row);
                for pos in (0..config.len()).rev() {
                    config[pos] += 1;
                    if config[pos] < cards[pos] {
                        break;
                    }
                    config[pos] = 0;
                }
            }
            cpts.push(NodeCpt {
                name: node.name.clone(),
                levels: node.levels.clone(),
                parents: sorted,
                probs,
                posterior: None,
            });
        }
        let cpts = CptSet::new(&graph, cpts)?;
        GroundTruth::new(graph, cpts, &rec.treatment, &rec.outcome, rec.seed)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        let nodes = self
            .cpts
            .nodes()
            .iter()
            .map(|n| NodeRecord {
                name: n.name.clone(),
                levels: n.levels.clone(),
                parents: n.parents.iter().map(|&p| self.graph.name(p).to_string()).collect(),
                cpt: n.probs.chunks_exact(n.card()).map(<[f64]>::to_vec).collect(),
            })
            .collect();
        let rec = TruthRecord {
            treatment: self.treatment.clone(),
            outcome: self.outcome.clone(),
            seed: self.seed,
            nodes,
        };
        serde_json::to_string_pretty(&rec).expect("plain data serializes")
    }

    /// Schema with every node categorical and the designated roles.
    pub fn schema(&self) -> Schema {
        let vars = self
            .cpts
            .nodes()
            .iter()
            .map(|n| {
                let role = if n.name == self.treatment {
                    Role::Treatment
                } else if n.name == self.outcome {
                    Role::Outcome
                } else {
                    Role::Covariate
                };
                let levels: Vec<&str> = n.levels.iter().map(String::as_str).collect();
                VariableSpec::categorical(&n.name, role, &levels)
            })
            .collect();
        Schema::new(vars).expect("ground truth has one treatment and one outcome")
    }

    pub fn treatment_levels(&self) -> &[String] {
        let t = self.graph.node(&self.treatment).expect("validated");
        &self.cpts.node(t).levels
    }

    /// `n` ancestral samples using the network's own seed.
    pub fn sample(&self, n: usize) -> Result<Dataset> {
        sample_dataset(self, n, self.seed)
    }
}

/// `n` i.i.d. rows by ancestral sampling. Rows are generated in fixed-size
/// blocks, each from its own substream of `seed`.
pub fn sample_dataset(gt: &GroundTruth, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Invalid("sample size must be at least 1".into()));
    }
    let order = gt.graph.topological_order();
    let k = gt.graph.n();
    let blocks: Vec<Vec<Vec<u32>>> = (0..n.div_ceil(BLOCK_ROWS))
        .into_par_iter()
        .map(|b| {
            let rows = BLOCK_ROWS.min(n - b * BLOCK_ROWS);
            let mut rng = substream(seed, b as u64);
            let mut cols = vec![Vec::with_capacity(rows); k];
            let mut states = vec![0usize; k];
            for _ in 0..rows {
                for &v in &order {
                    let node = gt.cpts.node(v);
                    let row = node.row(gt.cpts.parent_config(v, &states));
                    states[v] = draw_level(row, rng.random::<f64>());
                }
                for v in 0..k {
                    cols[v].push(states[v] as u32);
                }
            }
            cols
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n); k];
    for block in blocks {
        for (col, part) in columns.iter_mut().zip(block) {
            col.extend(part);
        }
    }
    Dataset::from_columns(gt.schema(), columns.into_iter().map(Column::Categorical).collect())
}

fn draw_level(row: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (k, &p) in row.iter().enumerate() {
        cum += p;
        if u < cum {
            return k;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Random discrete network for testing: nodes `X0, X1, …` with 2 to
/// `max_card` levels, each node drawing up to `max_parents` parents among
/// nodes earlier in a random order, and CPT rows bounded away from zero.
pub fn random_network(n_nodes: usize, max_parents: usize, max_card: usize, seed: u64) -> Result<(Dag, CptSet)> {
    if n_nodes == 0 || max_card < 2 {
        return Err(Error::Invalid("need at least one node and two levels".into()));
    }
    let mut rng = substream(seed, 0);
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for j in 1..n_nodes {
        let mut earlier: Vec<usize> = order[..j].to_vec();
        earlier.shuffle(&mut rng);
        let k = rng.random_range(0..=max_parents.min(j));
        edges.extend(earlier[..k].iter().map(|&u| (u, order[j])));
    }
    let names: Vec<String> = (0..n_nodes).map(|i| format!("X{i}")).collect();
    let g = Dag::new(names.clone(), &edges)?;
    let cards: Vec<usize> = (0..n_nodes).map(|_| rng.random_range(2..=max_card)).collect();
    let nodes = (0..n_nodes)
        .map(|v| {
            let parents = g.parents(v).to_vec();
            let rows: usize = parents.iter().map(|&p| cards[p]).product();
            let mut probs = Vec::with_capacity(rows * cards[v]);
            for _ in 0..rows {
                let raw: Vec<f64> = (0..cards[v]).map(|_| rng.random_range(0.05..1.0)).collect();
                let z: f64 = raw.iter().sum();
                probs.extend(raw.iter().map(|x| x / z));
            }
            NodeCpt {
                name: names[v].clone(),
                levels: (0..cards[v]).map(|k| k.to_string()).collect(),
                parents,
                probs,
                posterior: None,
            }
        })
        .collect();
    let cpts = CptSet::new(&g, nodes)?;
    Ok((g, cpts))
}

/// Dense joint distribution over all variables, last variable fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub names: Vec<String>,
    pub cards: Vec<usize>,
    pub probs: Vec<f64>,
}

/// Product of all conditional tables over the full state space.
pub fn enumerate_joint(gt: &GroundTruth) -> Result<JointTable> {
    enumerate_network(&gt.graph, &gt.cpts)
}

pub fn enumerate_network(g: &Dag, cpts: &CptSet) -> Result<JointTable> {
    let cards = cpts.cards();
    let size = cards.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c).filter(|&s| s <= JOINT_CAP));
    let Some(size) = size else {
        let size = cards.iter().map(|&c| c as u128).product();
        return Err(Error::StateSpace { size, cap: JOINT_CAP as u128 });
    };
    let mut probs = Vec::with_capacity(size);
    let mut states = vec![0usize; cards.len()];
    for idx in 0..size {
        decode(idx, &cards, &mut states);
        let p = (0..cards.len())
            .map(|v| cpts.node(v).probs[cpts.parent_config(v, &states) * cards[v] + states[v]])
            .product();
        probs.push(p);
    }
    Ok(JointTable {
        names: g.nodes().to_vec(),
        cards,
        probs,
    })
}

fn decode(mut idx: usize, cards: &[usize], states: &mut [usize]) {
    for v in (0..cards.len()).rev() {
        states[v] = idx % cards[v];
        idx /= cards[v];
    }
}

impl JointTable {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn mass(&self, fixed: &[(usize, usize)]) -> f64 {
        let mut states = vec![0usize; self.cards.len()];
        let mut sum = 0.0;
        for (idx, &p) in self.probs.iter().enumerate() {
            decode(idx, &self.cards, &mut states);
            if fixed.iter().all(|&(v, s)| states[v] == s) {
                sum += p;
            }
        }
        sum
    }

    /// Distribution of `query` given `evidence`.
    pub fn distribution(&self, query: usize, evidence: &[(usize, usize)]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cards[query]];
        let mut states = vec![0usize; self.cards.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            decode(idx, &self.cards, &mut states);
            if evidence.iter().all(|&(v, s)| states[v] == s) {
                out[states[query]] += p;
            }
        }
        let z: f64 = out.iter().sum();
        if z <= 0.0 {
            return Err(Error::ZeroEvidence);
        }
        out.iter_mut().for_each(|x| *x /= z);
        Ok(out)
    }

    /// Largest `|P(a, b | z) − P(a | z) P(b | z)|` over all configurations
    /// with `P(z) > 0`.
    pub fn ci_violation(&self, a: usize, b: usize, z: &[usize]) -> f64 {
        let zcards: Vec<usize> = z.iter().map(|&v| self.cards[v]).collect();
        let nz: usize = zcards.iter().product();
        let (ra, rb) = (self.cards[a], self.cards[b]);
        let mut tab = vec![0.0; nz * ra * rb];
        let mut states = vec![0usize; self.cards.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            decode(idx, &self.cards, &mut states);
            let mut j = 0;
            for (&v, &c) in z.iter().zip(&zcards) {
                j = j * c + states[v];
            }
            tab[(j * ra + states[a]) * rb + states[b]] += p;
        }
        let mut worst: f64 = 0.0;
        for block in tab.chunks_exact(ra * rb) {
            let pz: f64 = block.iter().sum();
            if pz <= 0.0 {
                continue;
            }
            for x in 0..ra {
                let pa: f64 = block[x * rb..(x + 1) * rb].iter().sum::<f64>() / pz;
                for y in 0..rb {
                    let pb: f64 = (0..ra).map(|xx| block[xx * rb + y]).sum::<f64>() / pz;
                    worst = worst.max((block[x * rb + y] / pz - pa * pb).abs());
                }
            }
        }
        worst
    }
}

/// `P(query = level | evidence)` by summation over the joint table.
pub fn oracle_marginal(jt: &JointTable, query: (usize, usize), evidence: &[(usize, usize)]) -> Result<f64> {
    let z = jt.mass(evidence);
    if z <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    let mut fixed = evidence.to_vec();
    fixed.push(query);
    Ok(jt.mass(&fixed) / z)
}

/// `P(outcome = "1" | do(treatment = level))` by enumerating the mutilated
/// network.
pub fn oracle_do_prob(gt: &GroundTruth, level: &str) -> Result<f64> {
    let t = gt.graph.node(&gt.treatment)?;
    let s = gt.graph.node(&gt.outcome)?;
    let lt = gt.cpts.level_of(t, level)?;
    let one = gt.cpts.level_of(s, "1")?;
    let cut = gt.graph.mutilate(t);
    let forced = gt.cpts.with_point_mass(t, lt)?;
    let joint = enumerate_network(&cut, &forced)?;
    oracle_marginal(&joint, (s, one), &[])
}

/// Exact interventional risk ratio of `treated` against `control`.
pub fn oracle_do_ace(gt: &GroundTruth, treated: &str, control: &str) -> Result<f64> {
    let num = oracle_do_prob(gt, treated)?;
    let den = oracle_do_prob(gt, control)?;
    if den <= 0.0 {
        return Err(Error::Invalid("interventional probability of the control arm is zero".into()));
    }
    Ok(num / den)
}

/// Observational (unadjusted) risk ratio `P(S=1 | T=treated) / P(S=1 | T=control)`.
pub fn oracle_naive_ratio(gt: &GroundTruth, treated: &str, control: &str) -> Result<f64> {
    let t = gt.graph.node(&gt.treatment)?;
    let s = gt.graph.node(&gt.outcome)?;
    let one = gt.cpts.level_of(s, "1")?;
    let joint = enumerate_joint(gt)?;
    let num = oracle_marginal(&joint, (s, one), &[(t, gt.cpts.level_of(t, treated)?)])?;
    let den = oracle_marginal(&joint, (s, one), &[(t, gt.cpts.level_of(t, control)?)])?;
    Ok(num / den)
}
