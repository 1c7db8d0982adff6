use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::structure::{Dag, DiscreteData};

/// Default cap on parent configurations per node.
pub const DEFAULT_CONFIG_CAP: usize = 4096;

/// Log BDeu marginal likelihood of one family.
///
/// `ess` is the equivalent sample size; each of the `q` parent
/// configurations gets `ess / q` pseudo-counts, split evenly over the `r`
/// child states.
pub fn family_score(
    data: &DiscreteData,
    child: usize,
    parents: &[usize],
    ess: f64,
    cap: usize,
) -> Result<f64> {
    if !(ess > 0.0 && ess.is_finite()) {
        return Err(Error::Invalid(format!("equivalent sample size must be positive, got {ess}")));
    }
    let r = data.cards()[child];
    let q = data.n_configs(parents, cap)?;
    let configs = data.config_indices(parents);
    let mut counts = vec![0u64; q * r];
    for (&j, &k) in configs.iter().zip(data.column(child)) {
        counts[j * r + k as usize] += 1;
    }
    let a_ij = ess / q as f64;
    let a_ijk = a_ij / r as f64;
    let lg_ij = ln_gamma(a_ij);
    let lg_ijk = ln_gamma(a_ijk);
    let mut score = 0.0;
    for row in counts.chunks_exact(r) {
        let n_ij: u64 = row.iter().sum();
        if n_ij == 0 {
            continue;
        }
        score += lg_ij - ln_gamma(a_ij + n_ij as f64);
        for &n_ijk in row {
            if n_ijk > 0 {
                score += ln_gamma(a_ijk + n_ijk as f64) - lg_ijk;
            }
        }
    }
    Ok(score)
}

/// Log BDeu score of `g`, summed over families. Nodes are matched to data
/// columns by name.
pub fn bdeu_score(data: &DiscreteData, g: &Dag, ess: f64) -> Result<f64> {
    let cols = data.align(g)?;
    let mut total = 0.0;
    for v in 0..g.n() {
        let parents: Vec<usize> = g.parents(v).iter().map(|&p| cols[p]).collect();
        total += family_score(data, cols[v], &parents, ess, DEFAULT_CONFIG_CAP)?;
    }
    Ok(total)
}

/// Memoizing family scorer for a graph whose nodes are the data columns in
/// order.
#[derive(Debug)]
pub struct BdeuScorer<'d> {
    data: &'d DiscreteData,
    ess: f64,
    cap: usize,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<'d> BdeuScorer<'d> {
    pub fn new(data: &'d DiscreteData, ess: f64) -> Result<Self> {
        if !(ess > 0.0 && ess.is_finite()) {
            return Err(Error::Invalid(format!("equivalent sample size must be positive, got {ess}")));
        }
        Ok(BdeuScorer {
            data,
            ess,
            cap: DEFAULT_CONFIG_CAP,
            cache: HashMap::new(),
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    /// `parents` must be sorted ascending.
    pub fn family(&mut self, child: usize, parents: &[usize]) -> Result<f64> {
        let key = (child, parents.to_vec());
        if let Some(&s) = self.cache.get(&key) {
            return Ok(s);
        }
        let s = family_score(self.data, child, parents, self.ess, self.cap)?;
        self.cache.insert(key, s);
        Ok(s)
    }

    pub fn score(&mut self, g: &Dag) -> Result<f64> {
        if g.n() != self.data.n_vars() {
            return Err(Error::Invalid("graph and data have different node counts".into()));
        }
        let mut total = 0.0;
        for v in 0..g.n() {
            total += self.family(v, g.parents(v))?;
        }
        Ok(total)
    }
}
