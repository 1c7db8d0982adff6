use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::features::{bin_feature, FeatureMatrix, FeatureSpec};
use crate::boost::tree::{grow, GrowParams, Node, Targets};
use crate::error::{Error, Result};

/// Probabilities are kept inside `[P_MIN, 1 − P_MIN]`.
pub const P_MIN: f64 = 1e-6;

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub max_trees: usize,
    pub shrinkage: f64,
    /// Maximum number of split levels per tree.
    pub interaction_depth: usize,
    /// Minimum number of rows in a leaf.
    pub min_node: usize,
    pub subsample_fraction: f64,
    /// 0 disables cross-validation.
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            max_trees: 15_000,
            shrinkage: 0.01,
            interaction_depth: 2,
            min_node: 10,
            subsample_fraction: 1.0,
            cv_folds: 0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.max_trees == 0 {
            return bad("max_trees must be at least 1".into());
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return bad(format!("shrinkage must lie in (0, 1], got {}", self.shrinkage));
        }
        if self.interaction_depth == 0 {
            return bad("interaction_depth must be at least 1".into());
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return bad(format!("subsample_fraction must lie in (0, 1], got {}", self.subsample_fraction));
        }
        if self.cv_folds == 1 || self.cv_folds > n_rows {
            return bad(format!("cv_folds must be 0 or in [2, {n_rows}], got {}", self.cv_folds));
        }
        Ok(())
    }
}

/// Stagewise additive logistic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub features: Vec<FeatureSpec>,
    pub initial_score: f64,
    pub shrinkage: f64,
    pub trees: Vec<Node>,
    /// Mean weighted deviance on the training rows at stages `0..=trees.len()`.
    pub train_deviance: Vec<f64>,
    /// Mean held-out deviance at stages `1..=trees.len()`, when cross-validated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_deviance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(P_MIN, 1.0 - P_MIN)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-row Bernoulli deviance at score `s`.
fn row_deviance(y: u8, s: f64) -> f64 {
    let p = clamp_prob(logistic(s));
    if y == 1 {
        -2.0 * p.ln()
    } else {
        -2.0 * (1.0 - p).ln()
    }
}

fn mean_deviance(y: &[u8], w: &[f64], score: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        num += w[i] * row_deviance(y[i], score[i]);
        den += w[i];
    }
    num / den
}

/// Fits a boosted model of `y` on `x` minimizing weighted Bernoulli deviance.
///
/// Each stage grows one least-squares tree on the residuals `y − p`, sets
/// leaves to Newton steps and scales them by the shrinkage. A leaf step that
/// would raise the training deviance of its rows is halved until it does not.
pub fn fit(x: &FeatureMatrix, y: &[u8], weights: Option<&[f64]>, cfg: &BoostConfig) -> Result<BoostModel> {
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::Invalid("cannot fit a model to zero rows".into()));
    }
    if y.len() != n {
        return Err(Error::Invalid(format!("{} targets for {n} rows", y.len())));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Invalid("targets must be 0 or 1".into()));
    }
    cfg.validate(n)?;
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n || w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::Invalid("weights must be finite, nonnegative, one per row".into()));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    let w_sum: f64 = w.iter().sum();
    if !(w_sum > 0.0) {
        return Err(Error::Invalid("weights sum to zero".into()));
    }
    let mut model = fit_core(x, y, &w, cfg)?;
    if cfg.cv_folds >= 2 && !model.trees.is_empty() {
        model.cv_deviance = Some(cross_validate(x, y, &w, cfg)?);
    } else if cfg.cv_folds >= 2 {
        model.cv_deviance = Some(Vec::new());
    }
    Ok(model)
}

/// Training units: either single rows, or (without subsampling) groups of
/// rows with identical binned features and target, which contribute to every
/// sum identically.
struct Units {
    rep: Vec<usize>,
    count: Vec<usize>,
    w: Vec<f64>,
    y: Vec<u8>,
}

fn make_units(codes: &[Vec<u16>], y: &[u8], w: &[f64], group: bool) -> Units {
    let n = y.len();
    if !group {
        return Units {
            rep: (0..n).collect(),
            count: vec![1; n],
            w: w.to_vec(),
            y: y.to_vec(),
        };
    }
    // units ordered by key, so the fit does not depend on row order
    let mut index: BTreeMap<Vec<u16>, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let mut key: Vec<u16> = codes.iter().map(|c| c[i]).collect();
        key.push(u16::from(y[i]));
        index.entry(key).or_default().push(i);
    }
    let mut u = Units { rep: Vec::new(), count: Vec::new(), w: Vec::new(), y: Vec::new() };
    for rows in index.into_values() {
        u.rep.push(rows[0]);
        u.count.push(rows.len());
        u.w.push(rows.iter().map(|&i| w[i]).sum());
        u.y.push(y[rows[0]]);
    }
    u
}

fn fit_core(x: &FeatureMatrix, y: &[u8], w: &[f64], cfg: &BoostConfig) -> Result<BoostModel> {
    let n = x.n_rows();
    let w_sum: f64 = w.iter().sum();
    let mean = y.iter().zip(w).map(|(&v, &wi)| f64::from(v) * wi).sum::<f64>() / w_sum;
    let features = x.specs();
    if mean <= 0.0 || mean >= 1.0 {
        let s = logit(clamp_prob(mean));
        return Ok(BoostModel {
            features,
            initial_score: s,
            shrinkage: cfg.shrinkage,
            trees: Vec::new(),
            train_deviance: vec![mean_deviance(y, w, &vec![s; n])],
            cv_deviance: None,
            warning: Some("target has a single class; fitted a constant model".into()),
        });
    }
    let s0 = logit(mean);
    let full_bins: Vec<_> = (0..x.n_features()).map(|f| bin_feature(x.feature(f))).collect();
    let codes: Vec<Vec<u16>> = full_bins.iter().map(|b| b.codes.clone()).collect();
    let units = make_units(&codes, y, w, cfg.subsample_fraction >= 1.0);
    let k = units.rep.len();
    let bins: Vec<_> = full_bins
        .into_iter()
        .map(|mut b| {
            b.codes = units.rep.iter().map(|&i| b.codes[i]).collect();
            b
        })
        .collect();
    let ux = x.select_rows(&units.rep);
    let params = GrowParams {
        max_depth: cfg.interaction_depth,
        min_node: cfg.min_node,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut score = vec![s0; k];
    let mut resid = vec![0.0; k];
    let mut hess = vec![0.0; k];
    let mut trees = Vec::with_capacity(cfg.max_trees);
    let mut train_deviance = Vec::with_capacity(cfg.max_trees + 1);
    train_deviance.push(mean_deviance(&units.y, &units.w, &score));
    let bag = ((n as f64 * cfg.subsample_fraction).floor() as usize).clamp(1, n);
    let mut all: Vec<usize> = (0..k).collect();
    for _ in 0..cfg.max_trees {
        for i in 0..k {
            let p = clamp_prob(logistic(score[i]));
            resid[i] = f64::from(units.y[i]) - p;
            hess[i] = p * (1.0 - p);
        }
        let rows = if bag < n {
            all.shuffle(&mut rng);
            let mut r = all[..bag].to_vec();
            r.sort_unstable();
            r
        } else {
            all.clone()
        };
        let targets = Targets {
            count: &units.count,
            w: &units.w,
            resid: &resid,
            hess: &hess,
        };
        let mut tree = grow(&bins, &targets, rows, &params);

        let leaf_of: Vec<usize> = (0..k).map(|i| tree.leaf_index(&ux, i)).collect();
        let mut members = vec![Vec::new(); tree.n_leaves()];
        for (i, &l) in leaf_of.iter().enumerate() {
            members[l].push(i);
        }
        let mut leaf_values = Vec::with_capacity(members.len());
        for (l, value) in tree.leaves_mut().into_iter().enumerate() {
            let rows = &members[l];
            let dev = |step: f64| -> f64 {
                rows.iter()
                    .map(|&i| units.w[i] * row_deviance(units.y[i], score[i] + cfg.shrinkage * step))
                    .sum()
            };
            let before = dev(0.0);
            let mut step = *value;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                if dev(step) <= before {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                step = 0.0;
            }
            *value = step;
            leaf_values.push(step);
        }
        for i in 0..k {
            score[i] += cfg.shrinkage * leaf_values[leaf_of[i]];
        }
        trees.push(tree);
        train_deviance.push(mean_deviance(&units.y, &units.w, &score));
    }
    Ok(BoostModel {
        features,
        initial_score: s0,
        shrinkage: cfg.shrinkage,
        trees,
        train_deviance,
        cv_deviance: None,
        warning: None,
    })
}

/// Mean held-out deviance per stage over `cv_folds` folds.
fn cross_validate(x: &FeatureMatrix, y: &[u8], w: &[f64], cfg: &BoostConfig) -> Result<Vec<f64>> {
    let n = x.n_rows();
    let k = cfg.cv_folds;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15));
    let mut fold = vec![0usize; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % k;
    }
    let fold_cfg = BoostConfig { cv_folds: 0, ..*cfg };
    let per_fold: Vec<(Vec<f64>, f64)> = (0..k)
        .into_par_iter()
        .map(|f| -> Result<(Vec<f64>, f64)> {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let wt: Vec<f64> = train.iter().map(|&i| w[i]).collect();
            let m = fit_core(&xt, &yt, &wt, &fold_cfg)?;
            // held-out rows collapse to distinct patterns with per-class weights
            let xv = x.select_rows(&test);
            let (reps, inverse) = xv.unique_rows();
            let mut wy = vec![[0.0f64; 2]; reps.len()];
            for (r, &i) in test.iter().enumerate() {
                wy[inverse[r]][y[i] as usize] += w[i];
            }
            let xu = xv.select_rows(&reps);
            let mut score = vec![m.initial_score; reps.len()];
            let mut out = Vec::with_capacity(cfg.max_trees);
            for stage in 0..cfg.max_trees {
                if let Some(tree) = m.trees.get(stage) {
                    for (r, s) in score.iter_mut().enumerate() {
                        *s += m.shrinkage * tree.predict(&xu, r);
                    }
                }
                let d: f64 = score
                    .iter()
                    .zip(&wy)
                    .map(|(&s, ww)| ww[0] * row_deviance(0, s) + ww[1] * row_deviance(1, s))
                    .sum();
                out.push(d);
            }
            let wsum = test.iter().map(|&i| w[i]).sum();
            Ok((out, wsum))
        })
        .collect::<Result<_>>()?;
    let total_w: f64 = per_fold.iter().map(|(_, s)| s).sum();
    Ok((0..cfg.max_trees)
        .map(|stage| per_fold.iter().map(|(d, _)| d[stage]).sum::<f64>() / total_w)
        .collect())
}

impl BoostModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    fn check_schema(&self, x: &FeatureMatrix) -> Result<()> {
        if x.specs() != self.features {
            return Err(Error::Schema("feature columns differ from the training schema".into()));
        }
        Ok(())
    }

    fn check_stage(&self, stage: Option<usize>) -> Result<usize> {
        let m = stage.unwrap_or(self.trees.len());
        if m > self.trees.len() {
            return Err(Error::Invalid(format!("stage {m} beyond {} fitted trees", self.trees.len())));
        }
        Ok(m)
    }

    /// Log-odds after `stage` trees (all trees when `None`).
    pub fn score(&self, x: &FeatureMatrix, row: usize, stage: Option<usize>) -> Result<f64> {
        self.check_schema(x)?;
        let m = self.check_stage(stage)?;
        Ok(self.initial_score + self.shrinkage * self.trees[..m].iter().map(|t| t.predict(x, row)).sum::<f64>())
    }

    /// Clamped probability for one row.
    pub fn predict_proba(&self, x: &FeatureMatrix, row: usize, stage: Option<usize>) -> Result<f64> {
        Ok(clamp_prob(logistic(self.score(x, row, stage)?)))
    }

    /// Clamped probabilities for every row.
    pub fn predict(&self, x: &FeatureMatrix, stage: Option<usize>) -> Result<Vec<f64>> {
        let m = self.check_stage(stage)?;
        Ok(self.predict_staged(x, &[m])?.pop().expect("one stage requested"))
    }

    /// Clamped probabilities at each of the ascending `stages`.
    pub fn predict_staged(&self, x: &FeatureMatrix, stages: &[usize]) -> Result<Vec<Vec<f64>>> {
        let (_, inverse, staged) = self.predict_staged_unique(x, stages)?;
        Ok(staged.iter().map(|p| inverse.iter().map(|&g| p[g]).collect()).collect())
    }

    /// Like [`BoostModel::predict_staged`], but per distinct row: returns the
    /// representative rows, each row's representative index, and the staged
    /// probabilities of the representatives.
    pub fn predict_staged_unique(
        &self,
        x: &FeatureMatrix,
        stages: &[usize],
    ) -> Result<(Vec<usize>, Vec<usize>, Vec<Vec<f64>>)> {
        self.check_schema(x)?;
        if stages.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invalid("stages must be ascending".into()));
        }
        if let Some(&last) = stages.last() {
            self.check_stage(Some(last))?;
        }
        let (reps, inverse) = x.unique_rows();
        let xu = x.select_rows(&reps);
        let mut score = vec![self.initial_score; reps.len()];
        let mut out = Vec::with_capacity(stages.len());
        let mut done = 0;
        for &m in stages {
            for tree in &self.trees[done..m] {
                for (r, s) in score.iter_mut().enumerate() {
                    *s += self.shrinkage * tree.predict(&xu, r);
                }
            }
            done = m;
            out.push(score.iter().map(|&s| clamp_prob(logistic(s))).collect());
        }
        Ok((reps, inverse, out))
    }

    /// Stage with the lowest cross-validated deviance, earliest on ties.
    pub fn select_stage_cv(&self) -> Result<usize> {
        let cv = self
            .cv_deviance
            .as_ref()
            .ok_or_else(|| Error::Invalid("model was fitted without cross-validation".into()))?;
        Ok(argmin_first(cv).map_or(0, |i| i + 1))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Index of the first minimum.
pub fn argmin_first(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| x < v[b]) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::features::Feature;
    use crate::boost::tree::Rule;

    fn xor_data() -> (FeatureMatrix, Vec<u8>) {
        let n = 400;
        let a: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        // unbalanced b, so the first split already has some gain
        let b: Vec<u32> = (0..n).map(|i| u32::from((i / 2) % 10 < 3)).collect();
        let y: Vec<u8> = a.iter().zip(&b).map(|(&a, &b)| (a ^ b) as u8).collect();
        let mut x = FeatureMatrix::new(n);
        x.push("a", Feature::Categorical { values: a, n_levels: 2 }).unwrap();
        x.push("b", Feature::Categorical { values: b, n_levels: 2 }).unwrap();
        (x, y)
    }

    fn small_cfg(depth: usize) -> BoostConfig {
        BoostConfig { max_trees: 50, shrinkage: 0.1, interaction_depth: depth, min_node: 5, ..BoostConfig::default() }
    }

    #[test]
    fn xor_needs_depth_two() {
        let (x, y) = xor_data();
        let d1 = fit(&x, &y, None, &small_cfg(1)).unwrap();
        let d2 = fit(&x, &y, None, &small_cfg(2)).unwrap();
        assert!(d2.train_deviance.last() < d1.train_deviance.last());
        assert!(d2.trees.iter().all(|t| t.depth() <= 2));
        assert!(d1.trees.iter().all(|t| t.depth() <= 1));
    }

    #[test]
    fn deviance_never_increases() {
        let (x, y) = xor_data();
        let m = fit(&x, &y, None, &small_cfg(2)).unwrap();
        assert!(m.train_deviance.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn single_class_gives_constant_model() {
        let (x, _) = xor_data();
        let y = vec![1u8; x.n_rows()];
        let m = fit(&x, &y, None, &small_cfg(2)).unwrap();
        assert!(m.warning.is_some());
        assert!(m.trees.is_empty());
        let p = m.predict_proba(&x, 0, None).unwrap();
        assert!((1.0 - 2.0 * P_MIN..1.0).contains(&p));
    }

    #[test]
    fn stage_zero_is_base_rate() {
        let (x, mut y) = xor_data();
        y[0] = 1 - y[0];
        let base = y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64;
        let m = fit(&x, &y, None, &small_cfg(2)).unwrap();
        for r in [0, 7, 99] {
            assert!((m.predict_proba(&x, r, Some(0)).unwrap() - base).abs() < 1e-12);
        }
        assert!(m.predict_proba(&x, 0, Some(m.n_trees() + 1)).is_err());
    }

    #[test]
    fn one_tree_formula() {
        let mut x = FeatureMatrix::new(1);
        x.push("a", Feature::Continuous(vec![0.0])).unwrap();
        let model = BoostModel {
            features: x.specs(),
            initial_score: -1.0,
            shrinkage: 0.01,
            trees: vec![Node::Split {
                feature: 0,
                rule: Rule::Threshold(0.5),
                left: Box::new(Node::Leaf { value: 2.0 }),
                right: Box::new(Node::Leaf { value: -3.0 }),
            }],
            train_deviance: vec![],
            cv_deviance: None,
            warning: None,
        };
        let p = model.predict_proba(&x, 0, None).unwrap();
        assert!((p - logistic(-1.0 + 0.01 * 2.0)).abs() < 1e-15);
        let back = BoostModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn stage_selection_tie_break() {
        let mut m = fit(&xor_data().0, &xor_data().1, None, &small_cfg(1)).unwrap();
        assert!(m.select_stage_cv().is_err());
        m.cv_deviance = Some(vec![0.5, 0.4, 0.4, 0.6]);
        assert_eq!(m.select_stage_cv().unwrap(), 2);
        m.cv_deviance = Some(vec![0.5, 0.4, 0.3]);
        assert_eq!(m.select_stage_cv().unwrap(), 3);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let (x, y) = xor_data();
        let m = fit(&x, &y, None, &small_cfg(1)).unwrap();
        let mut other = FeatureMatrix::new(x.n_rows());
        other.push("a", x.feature(0).clone()).unwrap();
        assert!(matches!(m.predict(&other, None), Err(Error::Schema(_))));
    }

    #[test]
    fn config_validation() {
        let (x, y) = xor_data();
        for cfg in [
            BoostConfig { max_trees: 0, ..small_cfg(1) },
            BoostConfig { shrinkage: 0.0, ..small_cfg(1) },
            BoostConfig { interaction_depth: 0, ..small_cfg(1) },
            BoostConfig { cv_folds: 1, ..small_cfg(1) },
            BoostConfig { subsample_fraction: 1.5, ..small_cfg(1) },
        ] {
            assert!(fit(&x, &y, None, &cfg).is_err());
        }
        assert!(fit(&FeatureMatrix::new(0), &[], None, &small_cfg(1)).is_err());
    }
}
