use serde::{Deserialize, Serialize};

use crate::boost::{fit, BoostConfig, BoostModel, FeatureMatrix};
use crate::data::TreatmentPair;
use crate::error::{Error, Result};
use crate::po::balance::{feature_values, KsPrep};

/// Number of candidate stages examined by balance-driven selection.
const STAGE_GRID: usize = 200;

/// Propensity model with its balance-selected stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityFit {
    pub model: BoostModel,
    pub selected_stage: usize,
    /// Clamped `P(T = 1 | X)` per row at the selected stage.
    pub pi: Vec<f64>,
    pub indicator: Vec<u8>,
    pub covariates: Vec<String>,
    pub balance_before: Vec<f64>,
    pub balance_after: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PropensityFit {
    pub fn max_ks_before(&self) -> f64 {
        self.balance_before.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_ks_after(&self) -> f64 {
        self.balance_after.iter().copied().fold(0.0, f64::max)
    }
}

/// Population (ATE) weights: `1/π` for treated rows, `1/(1 − π)` for controls.
pub fn ipw_weights(pi: &[f64], indicator: &[u8]) -> Vec<f64> {
    pi.iter()
        .zip(indicator)
        .map(|(&p, &t)| ipw_weight(p, t))
        .collect()
}

fn ipw_weight(p: f64, t: u8) -> f64 {
    if t == 1 {
        1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

/// Candidate stages `s, 2s, …, M` with `s = max(1, M / 200)`.
fn stage_grid(m: usize) -> Vec<usize> {
    let stride = (m / STAGE_GRID).max(1);
    let mut g: Vec<usize> = (1..=m / stride).map(|k| k * stride).collect();
    if g.last() != Some(&m) {
        g.push(m);
    }
    g
}

/// Rows collapsed to distinct (covariate pattern, arm) cells. The propensity
/// is constant within a cell, so weighted KS over cells with count-scaled
/// weights equals weighted KS over rows.
struct Cells {
    /// Distinct covariate pattern of each cell.
    group: Vec<usize>,
    t: Vec<u8>,
    count: Vec<f64>,
    preps: Vec<KsPrep>,
}

impl Cells {
    fn new(x: &FeatureMatrix, reps: &[usize], inverse: &[usize], t: &[u8]) -> Self {
        let mut cell_of = vec![usize::MAX; 2 * reps.len()];
        let (mut rows, mut group, mut ct, mut count) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, &g) in inverse.iter().enumerate() {
            let slot = &mut cell_of[2 * g + usize::from(t[i])];
            if *slot == usize::MAX {
                *slot = rows.len();
                rows.push(i);
                group.push(g);
                ct.push(t[i]);
                count.push(0.0);
            }
            count[*slot] += 1.0;
        }
        let cx = x.select_rows(&rows);
        let preps = (0..cx.n_features()).map(|f| KsPrep::new(&feature_values(cx.feature(f)))).collect();
        Cells { group, t: ct, count, preps }
    }

    /// Count-scaled IPW weights from per-pattern propensities.
    fn weights(&self, pi: &[f64]) -> Vec<f64> {
        self.group
            .iter()
            .zip(&self.t)
            .zip(&self.count)
            .map(|((&g, &t), &c)| c * ipw_weight(pi[g], t))
            .collect()
    }
}

/// Fits `t ~ covariates` by boosting and keeps the stage whose IPW weights
/// minimize the largest weighted KS statistic over covariates (earliest
/// stage on ties).
pub fn fit_propensity(pair: &TreatmentPair, covariates: &[String], cfg: &BoostConfig) -> Result<PropensityFit> {
    if pair.n_treated() < 2 || pair.n_control() < 2 {
        return Err(Error::EmptyArm(format!(
            "need at least 2 rows per arm, found {} treated and {} control",
            pair.n_treated(),
            pair.n_control()
        )));
    }
    let x = FeatureMatrix::from_dataset(&pair.data, covariates)?;
    let t = &pair.indicator;
    let model = fit(&x, t, None, cfg)?;
    let mut warnings: Vec<String> = model.warning.iter().cloned().collect();
    let preps: Vec<KsPrep> = (0..x.n_features()).map(|f| KsPrep::new(&feature_values(x.feature(f)))).collect();
    let ones = vec![1.0; t.len()];
    let balance_before = preps.iter().map(|p| p.statistic(t, &ones)).collect::<Result<Vec<_>>>()?;

    let (selected_stage, pi) = if model.n_trees() == 0 {
        (0, model.predict(&x, Some(0))?)
    } else if preps.is_empty() || balance_before.iter().all(|&k| k == 0.0) {
        warnings.push("balance is undefined for these covariates; using stage 1".into());
        (1, model.predict(&x, Some(1))?)
    } else {
        let grid = stage_grid(model.n_trees());
        let (reps, inverse, staged) = model.predict_staged_unique(&x, &grid)?;
        let cells = Cells::new(&x, &reps, &inverse, t);
        let mut best: Option<(f64, usize)> = None;
        for (k, pi) in staged.iter().enumerate() {
            let w = cells.weights(pi);
            let worst = cells
                .preps
                .iter()
                .map(|p| p.statistic(&cells.t, &w))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            if best.is_none_or(|(b, _)| worst < b) {
                best = Some((worst, k));
            }
        }
        let k = best.expect("grid is non-empty").1;
        (grid[k], inverse.iter().map(|&g| staged[k][g]).collect())
    };
    let w = ipw_weights(&pi, t);
    let balance_after = preps.iter().map(|p| p.statistic(t, &w)).collect::<Result<Vec<_>>>()?;
    Ok(PropensityFit {
        model,
        selected_stage,
        pi,
        indicator: t.clone(),
        covariates: covariates.to_vec(),
        balance_before,
        balance_after,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_formula() {
        let w = ipw_weights(&[0.5, 0.25, 0.25, 1.0 - 1e-6], &[1, 1, 0, 0]);
        assert_eq!(w[0], 2.0);
        assert_eq!(w[1], 4.0);
        assert!((w[2] - 4.0 / 3.0).abs() < 1e-15);
        assert!((w[3] - 1e6).abs() < 1e-3);
        assert!(w.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn grid_shape() {
        assert_eq!(stage_grid(3), vec![1, 2, 3]);
        let g = stage_grid(1000);
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 5);
        assert_eq!(*g.last().unwrap(), 1000);
        assert_eq!(*stage_grid(1001).last().unwrap(), 1001);
    }
}
