use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::boost::{Feature, FeatureMatrix};
use crate::error::{Error, Result};
use crate::rng::substream;

/// p-value below which a covariate is flagged as unbalanced.
pub const BALANCE_ALPHA: f64 = 0.05;

/// Default number of label permutations for KS p-values.
pub const DEFAULT_PERMUTATIONS: usize = 1000;

/// Largest gap between the weight-normalized empirical CDFs of two groups.
pub fn weighted_ks(xt: &[f64], wt: &[f64], xc: &[f64], wc: &[f64]) -> Result<f64> {
    if xt.is_empty() || xc.is_empty() {
        return Err(Error::EmptyArm("KS statistic needs two non-empty groups".into()));
    }
    if xt.len() != wt.len() || xc.len() != wc.len() {
        return Err(Error::Invalid("one weight per value is required".into()));
    }
    let x: Vec<f64> = xt.iter().chain(xc).copied().collect();
    let w: Vec<f64> = wt.iter().chain(wc).copied().collect();
    let t: Vec<u8> = std::iter::repeat_n(1u8, xt.len()).chain(std::iter::repeat_n(0u8, xc.len())).collect();
    let prep = KsPrep::new(&x);
    prep.statistic(&t, &w)
}

/// Sort order of one covariate, reused across weightings and permutations.
#[derive(Debug, Clone)]
pub(crate) struct KsPrep {
    order: Vec<usize>,
    /// `last_of_run[k]`: position `k` is the last of a run of equal values.
    last_of_run: Vec<bool>,
}

impl KsPrep {
    pub fn new(x: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let last_of_run = (0..order.len())
            .map(|k| k + 1 == order.len() || x[order[k + 1]] != x[order[k]])
            .collect();
        KsPrep { order, last_of_run }
    }

    pub fn statistic(&self, t: &[u8], w: &[f64]) -> Result<f64> {
        let (mut st, mut sc) = (0.0, 0.0);
        for (&ti, &wi) in t.iter().zip(w) {
            if wi < 0.0 || !wi.is_finite() {
                return Err(Error::Invalid("weights must be finite and nonnegative".into()));
            }
            if ti == 1 {
                st += wi;
            } else {
                sc += wi;
            }
        }
        if !(st > 0.0 && sc > 0.0) {
            return Err(Error::EmptyArm("a group has no positive weight".into()));
        }
        let (mut ft, mut fc, mut d) = (0.0, 0.0, 0.0f64);
        for (k, &i) in self.order.iter().enumerate() {
            if t[i] == 1 {
                ft += w[i] / st;
            } else {
                fc += w[i] / sc;
            }
            if self.last_of_run[k] {
                d = d.max((ft - fc).abs());
            }
        }
        Ok(d.min(1.0))
    }

    /// Share of label permutations (units keep their weights) whose statistic
    /// reaches the observed one, as `(1 + hits) / (1 + n_perm)`.
    pub fn permutation_p(&self, t: &[u8], w: &[f64], observed: f64, n_perm: usize, seed: u64) -> Result<f64> {
        if n_perm == 0 {
            return Ok(1.0);
        }
        let mut rng = substream(seed, 0);
        let mut perm = t.to_vec();
        let mut hits = 0usize;
        for _ in 0..n_perm {
            perm.shuffle(&mut rng);
            // a permutation can leave one group without weight; it counts as no evidence
            let s = self.statistic(&perm, w).unwrap_or(0.0);
            if s >= observed - 1e-12 {
                hits += 1;
            }
        }
        Ok((1 + hits) as f64 / (1 + n_perm) as f64)
    }
}

/// Numeric view of a feature for KS purposes (level index for categorical).
pub(crate) fn feature_values(f: &Feature) -> Vec<f64> {
    match f {
        Feature::Continuous(v) => v.clone(),
        Feature::Categorical { values, .. } => values.iter().map(|&v| f64::from(v)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub ks_before: f64,
    pub ks_after: f64,
    pub p_before: f64,
    pub p_after: f64,
    /// `p_after` below the 0.05 cutoff.
    pub unbalanced: bool,
}

/// Per-covariate KS statistics and permutation p-values, unweighted and
/// weighted by `weights`.
pub fn balance_table(x: &FeatureMatrix, t: &[u8], weights: &[f64], n_perm: usize, seed: u64) -> Result<Vec<BalanceRow>> {
    if t.len() != x.n_rows() || weights.len() != x.n_rows() {
        return Err(Error::Invalid("indicator and weights must have one entry per row".into()));
    }
    let ones = vec![1.0; x.n_rows()];
    (0..x.n_features())
        .map(|f| {
            let prep = KsPrep::new(&feature_values(x.feature(f)));
            let ks_before = prep.statistic(t, &ones)?;
            let ks_after = prep.statistic(t, weights)?;
            let p_before = prep.permutation_p(t, &ones, ks_before, n_perm, seed.wrapping_add(2 * f as u64))?;
            let p_after = prep.permutation_p(t, weights, ks_after, n_perm, seed.wrapping_add(2 * f as u64 + 1))?;
            Ok(BalanceRow {
                covariate: x.names()[f].clone(),
                ks_before,
                ks_after,
                p_before,
                p_after,
                unbalanced: p_after < BALANCE_ALPHA,
            })
        })
        .collect()
}
