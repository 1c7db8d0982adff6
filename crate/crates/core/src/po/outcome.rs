use serde::{Deserialize, Serialize};

use crate::boost::{fit, BoostConfig, BoostModel, Feature, FeatureMatrix};
use crate::data::TreatmentPair;
use crate::error::{Error, Result};

/// Boosted model of the binary outcome on covariates plus the treatment
/// indicator (the last feature, named after the treatment variable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub model: BoostModel,
    /// Stage used for prediction: CV-selected when the model was
    /// cross-validated, otherwise all trees.
    pub stage: usize,
    pub covariates: Vec<String>,
}

fn design(pair: &TreatmentPair, covariates: &[String], t: &[u8]) -> Result<FeatureMatrix> {
    let mut x = FeatureMatrix::from_dataset(&pair.data, covariates)?;
    let name = &pair.data.schema().treatment().name;
    x.push(
        name,
        Feature::Categorical {
            values: t.iter().map(|&v| u32::from(v)).collect(),
            n_levels: 2,
        },
    )?;
    Ok(x)
}

/// Fits the outcome model, weighted by `weights` when given.
pub fn fit_outcome_model(
    pair: &TreatmentPair,
    weights: Option<&[f64]>,
    covariates: &[String],
    cfg: &BoostConfig,
) -> Result<OutcomeModel> {
    let y = pair.binary_outcome()?;
    let x = design(pair, covariates, &pair.indicator)?;
    let model = fit(&x, &y, weights, cfg)?;
    let stage = if model.cv_deviance.is_some() {
        model.select_stage_cv()?
    } else {
        model.n_trees()
    };
    Ok(OutcomeModel {
        model,
        stage,
        covariates: covariates.to_vec(),
    })
}

impl OutcomeModel {
    /// Predicted `P(S = 1 | x_i, t)` for every row of `pair` with the
    /// indicator forced to `t`.
    pub fn predict_under(&self, pair: &TreatmentPair, t: u8) -> Result<Vec<f64>> {
        let x = design(pair, &self.covariates, &vec![t; pair.n_rows()])?;
        self.model.predict(&x, Some(self.stage))
    }
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::Invalid("risk ratio denominator is zero".into()));
    }
    Ok(num / den)
}

/// Mean prediction over all rows under treatment, over mean prediction over
/// all rows under control.
pub fn ace_combined(pair: &TreatmentPair, om: &OutcomeModel) -> Result<f64> {
    let n = pair.n_rows() as f64;
    let p1: f64 = om.predict_under(pair, 1)?.iter().sum::<f64>() / n;
    let p0: f64 = om.predict_under(pair, 0)?.iter().sum::<f64>() / n;
    ratio(p1, p0)
}

/// Treated rows predicted under treatment against control rows predicted
/// under control, each averaged with `weights` (uniform when `None`).
pub fn ace_individual(pair: &TreatmentPair, om: &OutcomeModel, weights: Option<&[f64]>) -> Result<f64> {
    if pair.n_treated() == 0 || pair.n_control() == 0 {
        return Err(Error::EmptyArm("individual prediction needs both arms".into()));
    }
    let ones = vec![1.0; pair.n_rows()];
    let w = weights.unwrap_or(&ones);
    let p1 = om.predict_under(pair, 1)?;
    let p0 = om.predict_under(pair, 0)?;
    let (mut n1, mut d1, mut n0, mut d0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..pair.n_rows() {
        if pair.indicator[i] == 1 {
            n1 += w[i] * p1[i];
            d1 += w[i];
        } else {
            n0 += w[i] * p0[i];
            d0 += w[i];
        }
    }
    ratio(n1 / d1, n0 / d0)
}
