use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::intervene::ace_do_idx;
use crate::inference::{fit_cpts, CptSet};
use crate::rng::substream;
use crate::stats::{log_sum_exp, weighted_quantile};
use crate::structure::{Dag, DiscreteData, ScoredNetwork};

/// Default number of posterior draws per network.
pub const DEFAULT_DRAWS: usize = 2000;

/// `m` draws of the interventional risk ratio for one network, each computed
/// from tables sampled row-wise from their Dirichlet posteriors.
#[allow(clippy::too_many_arguments)]
pub fn posterior_ace_samples(
    data: &DiscreteData,
    g: &Dag,
    treatment: &str,
    pair: (&str, &str),
    outcome: &str,
    m: usize,
    seed: u64,
    ess: f64,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Invalid("at least one posterior draw is required".into()));
    }
    let mean = fit_cpts(data, g, ess)?;
    let t = mean.index_of(treatment)?;
    let s = mean.index_of(outcome)?;
    let one = mean.level_of(s, "1")?;
    let (lt, lc) = (mean.level_of(t, pair.0)?, mean.level_of(t, pair.1)?);
    (0..m)
        .into_par_iter()
        .map(|d| {
            let mut rng = substream(seed, d as u64);
            let draw = sample_cpts(&mean, &mut rng)?;
            ace_do_idx(g, &draw, t, lt, lc, s, one)
        })
        .collect()
}

/// One joint draw of all tables from their Dirichlet posteriors.
pub fn sample_cpts<R: Rng + ?Sized>(mean: &CptSet, rng: &mut R) -> Result<CptSet> {
    let mut out = mean.clone();
    for v in 0..mean.len() {
        let node = mean.node(v);
        let alpha = node
            .posterior
            .as_ref()
            .ok_or_else(|| Error::Invalid(format!("`{}` has no posterior counts", node.name)))?;
        let r = node.card();
        let mut probs = Vec::with_capacity(alpha.len());
        for row in alpha.chunks_exact(r) {
            let start = probs.len();
            for &a in row {
                let gamma = Gamma::new(a, 1.0).map_err(|e| Error::Invalid(e.to_string()))?;
                probs.push(gamma.sample(rng).max(f64::MIN_POSITIVE));
            }
            let sum: f64 = probs[start..].iter().sum();
            probs[start..].iter_mut().for_each(|p| *p /= sum);
        }
        out.replace_probs(v, probs);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weights proportional to `exp(score)`, i.e. posterior model
    /// probabilities under a uniform prior over the listed networks.
    #[default]
    ScorePosterior,
    Uniform,
}

/// Model-averaged risk ratio with an equal-tailed 95% credible interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedAce {
    pub samples: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Averaging weight of each network; they sum to one.
pub fn model_weights(networks: &[ScoredNetwork], weighting: Weighting) -> Vec<f64> {
    match weighting {
        Weighting::Uniform => vec![1.0 / networks.len() as f64; networks.len()],
        Weighting::ScorePosterior => {
            let scores: Vec<f64> = networks.iter().map(|n| n.score).collect();
            let z = log_sum_exp(&scores);
            scores.iter().map(|s| (s - z).exp()).collect()
        }
    }
}

pub fn model_average_ace(networks: &[ScoredNetwork], samples: &[Vec<f64>], weighting: Weighting) -> Result<AveragedAce> {
    if networks.is_empty() {
        return Err(Error::Invalid("no networks to average".into()));
    }
    if samples.len() != networks.len() {
        return Err(Error::Invalid("one sample set per network is required".into()));
    }
    let m = samples[0].len();
    if m == 0 || samples.iter().any(|s| s.len() != m) {
        return Err(Error::Invalid("sample sets must be non-empty and equal in size".into()));
    }
    let weights = model_weights(networks, weighting);
    let mut values = Vec::with_capacity(m * networks.len());
    let mut pooled = Vec::with_capacity(m * networks.len());
    for (s, &w) in samples.iter().zip(&weights) {
        values.extend_from_slice(s);
        pooled.extend(std::iter::repeat_n(w / m as f64, m));
    }
    let point = values.iter().zip(&pooled).map(|(v, w)| v * w).sum::<f64>() / pooled.iter().sum::<f64>();
    Ok(AveragedAce {
        lower: weighted_quantile(&values, &pooled, 0.025),
        upper: weighted_quantile(&values, &pooled, 0.975),
        samples: samples.to_vec(),
        weights,
        point,
    })
}

/// Posterior draws for each network (seed substreams per network), then
/// model averaging.
#[allow(clippy::too_many_arguments)]
pub fn averaged_posterior_ace(
    data: &DiscreteData,
    networks: &[ScoredNetwork],
    treatment: &str,
    pair: (&str, &str),
    outcome: &str,
    m: usize,
    seed: u64,
    ess: f64,
    weighting: Weighting,
) -> Result<AveragedAce> {
    let samples = networks
        .iter()
        .enumerate()
        .map(|(i, net)| {
            let net_seed: u64 = substream(seed, u64::MAX - i as u64).random();
            posterior_ace_samples(data, &net.dag, treatment, pair, outcome, m, net_seed, ess)
        })
        .collect::<Result<Vec<_>>>()?;
    model_average_ace(networks, &samples, weighting)
}
