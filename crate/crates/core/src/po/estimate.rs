use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{BoostConfig, FeatureMatrix};
use crate::data::TreatmentPair;
use crate::error::{Error, Result};
use crate::po::{
    ace_combined, ace_individual, balance_table, fit_outcome_model, fit_propensity, ipw_weights, match_pairs,
    BalanceRow, DEFAULT_CALIPER,
};
use crate::rng::substream;
use crate::stats::quantile_sorted;

const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    IpwCombined,
    IpwIndividual,
    MatchCombined,
    MatchIndividual,
    Cbn,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::IpwCombined,
        Method::IpwIndividual,
        Method::MatchCombined,
        Method::MatchIndividual,
        Method::Cbn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::IpwCombined => "ipw_combined",
            Method::IpwIndividual => "ipw_individual",
            Method::MatchCombined => "match_combined",
            Method::MatchIndividual => "match_individual",
            Method::Cbn => "cbn",
        }
    }

    fn is_ipw(self) -> bool {
        matches!(self, Method::IpwCombined | Method::IpwIndividual)
    }

    fn is_match(self) -> bool {
        matches!(self, Method::MatchCombined | Method::MatchIndividual)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Comparison {
    pub treated: String,
    pub control: String,
}

impl Comparison {
    pub fn new(treated: &str, control: &str) -> Self {
        Comparison {
            treated: treated.to_string(),
            control: control.to_string(),
        }
    }

    /// `"<control>_to_<treated>"`, the direction of change being evaluated.
    pub fn label(&self) -> String {
        format!("{}_to_{}", self.control, self.treated)
    }
}

/// Point risk ratio with a 95% interval, shared by every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AceEstimate {
    pub comparison: Comparison,
    pub method: Method,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discard_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AceEstimate {
    pub fn crosses_one(&self) -> bool {
        self.lower <= 1.0 && self.upper >= 1.0
    }
}

/// Settings of the propensity-score pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoConfig {
    pub propensity: BoostConfig,
    pub outcome: BoostConfig,
    /// Matching caliper in standard deviations of logit π.
    pub caliper: f64,
    /// Bootstrap replications; 0 reports the point estimate only.
    pub bootstrap: usize,
    pub level: f64,
}

impl Default for PoConfig {
    fn default() -> Self {
        PoConfig {
            propensity: BoostConfig::default(),
            outcome: BoostConfig {
                cv_folds: 10,
                ..BoostConfig::default()
            },
            caliper: DEFAULT_CALIPER,
            bootstrap: 1000,
            level: 0.95,
        }
    }
}

impl PoConfig {
    fn with_seed(&self, seed: u64) -> PoConfig {
        PoConfig {
            propensity: BoostConfig { seed, ..self.propensity },
            outcome: BoostConfig {
                seed: seed.wrapping_add(1),
                ..self.outcome
            },
            ..*self
        }
    }
}

/// Point estimates of one pipeline family on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// `(combined, individual)` risk ratios.
    pub combined: f64,
    pub individual: f64,
    pub n_used: usize,
    pub discard_fraction: Option<f64>,
    pub warnings: Vec<String>,
}

/// Propensity fit, IPW weights, weighted outcome model, both risk ratios.
pub fn ipw_pipeline(pair: &TreatmentPair, covariates: &[String], cfg: &PoConfig) -> Result<PipelineOutput> {
    let fit = fit_propensity(pair, covariates, &cfg.propensity)?;
    let w = ipw_weights(&fit.pi, &pair.indicator);
    let om = fit_outcome_model(pair, Some(&w), covariates, &cfg.outcome)?;
    let mut warnings = fit.warnings.clone();
    warnings.extend(om.model.warning.iter().cloned());
    Ok(PipelineOutput {
        combined: ace_combined(pair, &om)?,
        individual: ace_individual(pair, &om, Some(&w))?,
        n_used: pair.n_rows(),
        discard_fraction: None,
        warnings,
    })
}

/// Propensity fit, greedy caliper matching, unweighted outcome model on the
/// matched rows, both risk ratios on the matched rows.
pub fn match_pipeline(pair: &TreatmentPair, covariates: &[String], cfg: &PoConfig) -> Result<PipelineOutput> {
    let fit = fit_propensity(pair, covariates, &cfg.propensity)?;
    let m = match_pairs(&fit, cfg.caliper)?;
    if m.pairs.is_empty() {
        return Err(Error::EmptyArm("matching kept no pairs".into()));
    }
    let matched = pair.select_rows(&m.kept_rows);
    let om = fit_outcome_model(&matched, None, covariates, &cfg.outcome)?;
    let mut warnings = fit.warnings.clone();
    warnings.extend(om.model.warning.iter().cloned());
    Ok(PipelineOutput {
        combined: ace_combined(&matched, &om)?,
        individual: ace_individual(&matched, &om, None)?,
        n_used: matched.n_rows(),
        discard_fraction: Some(m.discard_fraction),
        warnings,
    })
}

/// Percentile interval of a row-resampling bootstrap.
///
/// `pipeline` maps a resampled pair and a replicate seed to one or more
/// statistics; the result has one `(lower, upper)` per statistic. Resamples
/// with fewer than two rows in an arm are redrawn.
pub fn bootstrap_ci<F>(pair: &TreatmentPair, pipeline: F, b: usize, level: f64, seed: u64) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&TreatmentPair, u64) -> Result<Vec<f64>> + Sync,
{
    let reps = bootstrap_replicates(pair, pipeline, b, seed)?;
    Ok(percentile_intervals(&reps, level))
}

/// Raw bootstrap statistics, one vector per replicate.
pub fn bootstrap_replicates<F>(pair: &TreatmentPair, pipeline: F, b: usize, seed: u64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&TreatmentPair, u64) -> Result<Vec<f64>> + Sync,
{
    if b < 2 {
        return Err(Error::Invalid("the bootstrap needs at least 2 replications".into()));
    }
    let n = pair.n_rows();
    (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            for _ in 0..=MAX_REDRAWS {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let sample = pair.select_rows(&rows);
                if sample.n_treated() >= 2 && sample.n_control() >= 2 {
                    return pipeline(&sample, rng.random());
                }
            }
            Err(Error::EmptyArm(format!("bootstrap replicate {r} kept drawing a near-empty arm")))
        })
        .collect()
}

/// Equal-tailed percentile interval per statistic.
pub fn percentile_intervals(reps: &[Vec<f64>], level: f64) -> Vec<(f64, f64)> {
    let k = reps.first().map_or(0, Vec::len);
    let a = (1.0 - level) / 2.0;
    (0..k)
        .map(|j| {
            let mut v: Vec<f64> = reps.iter().map(|r| r[j]).collect();
            v.sort_by(f64::total_cmp);
            (quantile_sorted(&v, a), quantile_sorted(&v, 1.0 - a))
        })
        .collect()
}

/// Runs the requested propensity-score methods on one comparison. IPW and
/// matching are separate families: a failure in one does not affect the other.
pub fn estimate_po(
    pair: &TreatmentPair,
    covariates: &[String],
    cfg: &PoConfig,
    methods: &[Method],
    seed: u64,
) -> Vec<(Method, Result<AceEstimate>)> {
    let comparison = Comparison::new(&pair.treated_level, &pair.control_level);
    let mut out = Vec::new();
    type Pipeline = fn(&TreatmentPair, &[String], &PoConfig) -> Result<PipelineOutput>;
    let families: [(fn(Method) -> bool, Pipeline, Method, Method); 2] = [
        (Method::is_ipw, ipw_pipeline, Method::IpwCombined, Method::IpwIndividual),
        (Method::is_match, match_pipeline, Method::MatchCombined, Method::MatchIndividual),
    ];
    for (family, (member, pipeline, combined, individual)) in families.into_iter().enumerate() {
        let wanted: Vec<Method> = methods.iter().copied().filter(|&m| member(m)).collect();
        if wanted.is_empty() {
            continue;
        }
        let fam_seed = family_seed(seed, family);
        let result = run_family(pair, covariates, cfg, pipeline, fam_seed);
        for m in wanted {
            let est = match &result {
                Ok((point, intervals)) => {
                    let (value, (lower, upper)) = if m == combined {
                        (point.combined, intervals.0)
                    } else {
                        debug_assert_eq!(m, individual);
                        (point.individual, intervals.1)
                    };
                    let mut warnings = point.warnings.clone();
                    if cfg.bootstrap == 0 {
                        warnings.push("no bootstrap requested; interval collapsed to the point".into());
                    }
                    Ok(AceEstimate {
                        comparison: comparison.clone(),
                        method: m,
                        point: value,
                        lower,
                        upper,
                        n_used: point.n_used,
                        discard_fraction: point.discard_fraction,
                        warnings,
                    })
                }
                Err(e) => Err(Error::Shared(e.to_string())),
            };
            out.push((m, est));
        }
    }
    out
}

fn family_seed(seed: u64, family: usize) -> u64 {
    substream(seed, family as u64).random()
}

/// Covariate balance of the IPW pipeline, before and after weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub comparison: Comparison,
    pub selected_stage: usize,
    pub n_trees: usize,
    pub max_ks_before: f64,
    pub max_ks_after: f64,
    pub rows: Vec<BalanceRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Balance table for the propensity model that [`estimate_po`] fits for
/// its IPW estimates under the same `seed`.
pub fn ipw_balance(
    pair: &TreatmentPair,
    covariates: &[String],
    cfg: &PoConfig,
    n_perm: usize,
    seed: u64,
) -> Result<BalanceReport> {
    let cfg = cfg.with_seed(family_seed(seed, 0));
    let fit = fit_propensity(pair, covariates, &cfg.propensity)?;
    let w = ipw_weights(&fit.pi, &pair.indicator);
    let x = FeatureMatrix::from_dataset(&pair.data, covariates)?;
    let rows = balance_table(&x, &pair.indicator, &w, n_perm, family_seed(seed, 2))?;
    Ok(BalanceReport {
        comparison: Comparison::new(&pair.treated_level, &pair.control_level),
        selected_stage: fit.selected_stage,
        n_trees: fit.model.n_trees(),
        max_ks_before: fit.max_ks_before(),
        max_ks_after: fit.max_ks_after(),
        rows,
        warnings: fit.warnings,
    })
}

type FamilyResult = (PipelineOutput, ((f64, f64), (f64, f64)));

fn run_family(
    pair: &TreatmentPair,
    covariates: &[String],
    cfg: &PoConfig,
    pipeline: fn(&TreatmentPair, &[String], &PoConfig) -> Result<PipelineOutput>,
    seed: u64,
) -> Result<FamilyResult> {
    let point = pipeline(pair, covariates, &cfg.with_seed(seed))?;
    if cfg.bootstrap == 0 {
        let ci = ((point.combined, point.combined), (point.individual, point.individual));
        return Ok((point, ci));
    }
    let ci = bootstrap_ci(
        pair,
        |sample, s| {
            let o = pipeline(sample, covariates, &cfg.with_seed(s))?;
            Ok(vec![o.combined, o.individual])
        },
        cfg.bootstrap,
        cfg.level,
        seed,
    )?;
    Ok((point, (ci[0], ci[1])))
}
