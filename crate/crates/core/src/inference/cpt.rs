use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::{Dag, DiscreteData};

/// Conditional table of one node.
///
/// Rows are parent configurations in mixed radix with the first parent most
/// significant; `probs[j * r + k] = P(node = k | parents = j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCpt {
    pub name: String,
    pub levels: Vec<String>,
    /// Parent node indices, ascending.
    pub parents: Vec<usize>,
    pub probs: Vec<f64>,
    /// Posterior Dirichlet parameters `α_ijk + N_ijk`, same layout as `probs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<Vec<f64>>,
}

impl NodeCpt {
    pub fn card(&self) -> usize {
        self.levels.len()
    }

    pub fn n_rows(&self) -> usize {
        self.probs.len() / self.card()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let r = self.card();
        &self.probs[j * r..(j + 1) * r]
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }
}

/// One conditional table per node, aligned with a DAG's node order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CptSet {
    nodes: Vec<NodeCpt>,
}

const ROW_TOL: f64 = 1e-12;

impl CptSet {
    /// Validates shapes and row sums against `g`.
    pub fn new(g: &Dag, nodes: Vec<NodeCpt>) -> Result<Self> {
        if nodes.len() != g.n() {
            return Err(Error::Invalid(format!(
                "{} tables for {} nodes",
                nodes.len(),
                g.n()
            )));
        }
        for (v, cpt) in nodes.iter().enumerate() {
            if cpt.name != g.name(v) {
                return Err(Error::Invalid(format!(
                    "table {v} is for `{}`, graph node is `{}`",
                    cpt.name,
                    g.name(v)
                )));
            }
            if cpt.parents.as_slice() != g.parents(v) {
                return Err(Error::Invalid(format!(
                    "parents of `{}` do not match the graph",
                    cpt.name
                )));
            }
            if cpt.levels.is_empty() {
                return Err(Error::Invalid(format!("`{}` has no levels", cpt.name)));
            }
        }
        for (v, cpt) in nodes.iter().enumerate() {
            let q: usize = g.parents(v).iter().map(|&p| nodes[p].card()).product();
            let r = cpt.card();
            if cpt.probs.len() != q * r {
                return Err(Error::Invalid(format!(
                    "`{}` needs {} entries ({q} rows x {r}), got {}",
                    cpt.name,
                    q * r,
                    cpt.probs.len()
                )));
            }
            for (j, row) in cpt.probs.chunks_exact(r).enumerate() {
                if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return Err(Error::Invalid(format!("`{}` row {j} has a negative entry", cpt.name)));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > ROW_TOL {
                    return Err(Error::Invalid(format!(
                        "`{}` row {j} sums to {s}, not 1",
                        cpt.name
                    )));
                }
            }
            if let Some(post) = &cpt.posterior {
                if post.len() != cpt.probs.len() || post.iter().any(|&a| !(a > 0.0)) {
                    return Err(Error::Invalid(format!(
                        "`{}` has malformed posterior counts",
                        cpt.name
                    )));
                }
            }
        }
        Ok(CptSet { nodes })
    }

    pub fn nodes(&self) -> &[NodeCpt] {
        &self.nodes
    }

    pub fn node(&self, v: usize) -> &NodeCpt {
        &self.nodes[v]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cards(&self) -> Vec<usize> {
        self.nodes.iter().map(NodeCpt::card).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn level_of(&self, v: usize, label: &str) -> Result<usize> {
        self.nodes[v].level_index(label).ok_or_else(|| {
            Error::Invalid(format!("`{label}` is not a level of `{}`", self.nodes[v].name))
        })
    }

    /// Row index of `v`'s table for a full assignment `states`.
    pub fn parent_config(&self, v: usize, states: &[usize]) -> usize {
        let mut j = 0;
        for &p in &self.nodes[v].parents {
            j = j * self.nodes[p].card() + states[p];
        }
        j
    }

    /// Replaces node `v`'s table by a point mass at `level` with no parents.
    /// The caller pairs this with a mutilated graph.
    pub fn with_point_mass(&self, v: usize, level: usize) -> Result<CptSet> {
        let r = self.nodes[v].card();
        if level >= r {
            return Err(Error::Invalid(format!("level {level} out of range for `{}`", self.nodes[v].name)));
        }
        let mut nodes = self.nodes.clone();
        let mut probs = vec![0.0; r];
        probs[level] = 1.0;
        nodes[v] = NodeCpt {
            name: nodes[v].name.clone(),
            levels: nodes[v].levels.clone(),
            parents: Vec::new(),
            probs,
            posterior: None,
        };
        Ok(CptSet { nodes })
    }

    pub(crate) fn replace_probs(&mut self, v: usize, probs: Vec<f64>) {
        self.nodes[v].probs = probs;
    }
}

/// Posterior-mean tables under a BDeu Dirichlet prior with equivalent sample
/// size `ess`:
/// `P(k | j) = (N_ijk + ess/(r q)) / (N_ij + ess/q)`.
pub fn fit_cpts(data: &DiscreteData, g: &Dag, ess: f64) -> Result<CptSet> {
    if !(ess > 0.0 && ess.is_finite()) {
        return Err(Error::Invalid(format!("equivalent sample size must be positive, got {ess}")));
    }
    let cols = data.align(g)?;
    let cards: Vec<usize> = cols.iter().map(|&c| data.cards()[c]).collect();
    let mut nodes = Vec::with_capacity(g.n());
    for v in 0..g.n() {
        let r = cards[v];
        let parents = g.parents(v).to_vec();
        let pcols: Vec<usize> = parents.iter().map(|&p| cols[p]).collect();
        let q = data.n_configs(&pcols, usize::MAX)?;
        let configs = data.config_indices(&pcols);
        let mut counts = vec![0.0f64; q * r];
        for (&j, &k) in configs.iter().zip(data.column(cols[v])) {
            counts[j * r + k as usize] += 1.0;
        }
        let a_ijk = ess / (q * r) as f64;
        let posterior: Vec<f64> = counts.iter().map(|&c| c + a_ijk).collect();
        let mut probs = Vec::with_capacity(q * r);
        for row in posterior.chunks_exact(r) {
            let s: f64 = row.iter().sum();
            probs.extend(row.iter().map(|&a| a / s));
        }
        nodes.push(NodeCpt {
            name: g.name(v).to_string(),
            levels: data.levels()[cols[v]].clone(),
            parents,
            probs,
            posterior: Some(posterior),
        });
    }
    Ok(CptSet { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab(rows: &[(u32, u32)]) -> DiscreteData {
        DiscreteData::from_columns(
            vec!["A".into(), "B".into()],
            vec![2, 2],
            vec![rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()],
        )
        .unwrap()
    }

    #[test]
    fn posterior_mean_with_unit_ess() {
        // N(a=1) = 4, N(b=1 | a=1) = 3; α_ijk = 1/4, α_ij = 1/2
        let d = ab(&[(1, 1), (1, 1), (1, 1), (1, 0), (0, 0)]);
        let g = Dag::from_names(&["A", "B"], &[("A", "B")]).unwrap();
        let cpts = fit_cpts(&d, &g, 1.0).unwrap();
        let p = cpts.node(1).row(1)[1];
        assert!((p - 3.25 / 4.5).abs() < 1e-12);
        assert!((p - 0.7222).abs() < 1e-4);
        assert_eq!(cpts.node(1).posterior.as_ref().unwrap()[3], 3.25);
    }

    #[test]
    fn no_data_gives_uniform_tables() {
        let d = ab(&[]);
        let g = Dag::from_names(&["A", "B"], &[("A", "B")]).unwrap();
        let cpts = fit_cpts(&d, &g, 1.0).unwrap();
        for node in cpts.nodes() {
            assert!(node.probs.iter().all(|&p| (p - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn unseen_parent_config_is_prior_mean() {
        let d = ab(&[(0, 1), (0, 1), (0, 0)]);
        let g = Dag::from_names(&["A", "B"], &[("A", "B")]).unwrap();
        let cpts = fit_cpts(&d, &g, 1.0).unwrap();
        assert_eq!(cpts.node(1).row(1), &[0.5, 0.5]);
        assert!(cpts.nodes().iter().all(|n| n.probs.iter().all(|&p| p > 0.0)));
    }

    #[test]
    fn missing_node_in_data() {
        let d = ab(&[(0, 1)]);
        let g = Dag::from_names(&["A", "C"], &[]).unwrap();
        assert!(matches!(fit_cpts(&d, &g, 1.0), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn validation_catches_bad_rows() {
        let g = Dag::from_names(&["A"], &[]).unwrap();
        let bad = NodeCpt {
            name: "A".into(),
            levels: vec!["0".into(), "1".into()],
            parents: vec![],
            probs: vec![0.5, 0.6],
            posterior: None,
        };
        assert!(CptSet::new(&g, vec![bad]).is_err());
    }
}
