//! Small numeric helpers shared by the estimators.

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Inverse of the weighted empirical CDF: the smallest value whose
/// cumulative normalized weight reaches `p`.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> f64 {
    assert_eq!(values.len(), weights.len());
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    assert!(!idx.is_empty(), "weighted quantile needs positive weight");
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let total: f64 = idx.iter().map(|&i| weights[i]).sum();
    let target = p.clamp(0.0, 1.0) * total;
    let mut cum = 0.0;
    for &i in &idx {
        cum += weights[i];
        if cum >= target * (1.0 - 1e-12) {
            return values[i];
        }
    }
    values[*idx.last().expect("non-empty")]
}

/// `ln Σ exp(x_i)` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_matches_hand_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 1.0), 4.0);
        assert!((quantile_sorted(&x, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&x, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn weighted_quantile_respects_mass() {
        let v = [3.0, 1.0, 2.0];
        assert_eq!(weighted_quantile(&v, &[1.0, 1.0, 1.0], 0.5), 2.0);
        assert_eq!(weighted_quantile(&v, &[0.0, 0.0, 5.0], 0.01), 2.0);
        assert_eq!(weighted_quantile(&v, &[0.9, 0.05, 0.05], 0.2), 3.0);
    }

    #[test]
    fn lse() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 0.0]) - 1000.0).abs() < 1e-12);
    }
}
