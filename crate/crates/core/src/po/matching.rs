use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::po::PropensityFit;

/// Default caliper, in standard deviations of logit π.
pub const DEFAULT_CALIPER: f64 = 0.2;

/// Outcome of 1:1 matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(treated row, control row)` pairs in the order they were formed.
    pub pairs: Vec<(usize, usize)>,
    /// Matched rows, ascending.
    pub kept_rows: Vec<usize>,
    pub discard_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Greedy 1:1 nearest-neighbour matching without replacement. Treated rows
/// are taken in row order; each takes the closest unused control within
/// `caliper` (inclusive), the lowest control index on ties. Returns `(treated index, control index)` pairs
/// into the two slices.
pub fn greedy_match(treated: &[f64], control: &[f64], caliper: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..control.len()).collect();
    order.sort_by(|&a, &b| control[a].total_cmp(&control[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| control[i]).collect();
    let n = sorted.len();
    // next[k]: first unused position >= k (n if none); prev[k + 1]: last unused position < k + 1
    let mut next: Vec<usize> = (0..=n).collect();
    let mut prev: Vec<usize> = (0..=n).collect();
    let mut pairs = Vec::new();
    for (ti, &x) in treated.iter().enumerate() {
        let pos = sorted.partition_point(|&v| v < x);
        let r = find(&mut next, pos);
        let l = find(&mut prev, pos);
        let right = (r < n).then(|| (sorted[r] - x, r));
        // Among equal control values prefer the lowest row, on both sides.
        let left = (l > 0).then(|| {
            let v = sorted[l - 1];
            (x - v, find(&mut next, sorted.partition_point(|&s| s < v)))
        });
        let pick = match (left, right) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 || (b.0 == a.0 && order[b.1] < order[a.1]) { b } else { a }),
            (a, b) => a.or(b),
        };
        if let Some((d, k)) = pick {
            if d <= caliper {
                pairs.push((ti, order[k]));
                next[k] = k + 1;
                prev[k + 1] = k;
            }
        }
    }
    pairs
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    while parent[x] != root {
        let up = parent[x];
        parent[x] = root;
        x = up;
    }
    root
}

/// Matches on logit π with a caliper of `caliper_sd` standard deviations of
/// logit π over all rows.
pub fn match_pairs(fit: &PropensityFit, caliper_sd: f64) -> Result<MatchResult> {
    if !(caliper_sd > 0.0) {
        return Err(Error::Invalid(format!("caliper must be positive, got {caliper_sd}")));
    }
    let logit: Vec<f64> = fit.pi.iter().map(|&p| (p / (1.0 - p)).ln()).collect();
    let t_rows: Vec<usize> = (0..logit.len()).filter(|&i| fit.indicator[i] == 1).collect();
    let c_rows: Vec<usize> = (0..logit.len()).filter(|&i| fit.indicator[i] == 0).collect();
    if t_rows.is_empty() || c_rows.is_empty() {
        return Err(Error::EmptyArm("matching needs both arms".into()));
    }
    let n = logit.len() as f64;
    let mean = logit.iter().sum::<f64>() / n;
    let sd = (logit.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let lt: Vec<f64> = t_rows.iter().map(|&i| logit[i]).collect();
    let lc: Vec<f64> = c_rows.iter().map(|&i| logit[i]).collect();
    let pairs: Vec<(usize, usize)> = greedy_match(&lt, &lc, caliper_sd * sd)
        .into_iter()
        .map(|(a, b)| (t_rows[a], c_rows[b]))
        .collect();
    let mut kept_rows: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    kept_rows.sort_unstable();
    let discard_fraction = 1.0 - kept_rows.len() as f64 / n;
    let warning = pairs.is_empty().then(|| "no treated row has a control within the caliper".to_string());
    Ok(MatchResult {
        pairs,
        kept_rows,
        discard_fraction,
        warning,
    })
}
