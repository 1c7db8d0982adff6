use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::structure::DiscreteData;

/// Largest contingency table the test will build.
const TABLE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Result {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Likelihood-ratio (G²) test of `a ⟂ b | z`.
///
/// Degrees of freedom are summed per stratum of `z` as
/// `(rows - 1)(cols - 1)` over the non-empty rows and columns of that
/// stratum, so empty strata and sampling zeros do not inflate them. With zero
/// degrees of freedom the p-value is 1.
pub fn g2_test(data: &DiscreteData, a: usize, b: usize, z: &[usize]) -> Result<G2Result> {
    let n = data.n_vars();
    if a >= n || b >= n || z.iter().any(|&v| v >= n) {
        return Err(Error::Invalid("variable index out of range".into()));
    }
    if a == b || z.contains(&a) || z.contains(&b) {
        return Err(Error::Invalid(
            "tested variables must be distinct and outside the conditioning set".into(),
        ));
    }
    if data.n_rows() == 0 {
        return Err(Error::Invalid("empty data".into()));
    }
    let (ra, rb) = (data.cards()[a], data.cards()[b]);
    let q = data.n_configs(z, TABLE_CAP / (ra * rb).max(1))?;
    let strata = data.config_indices(z);
    let mut counts = vec![0u64; q * ra * rb];
    for ((&s, &x), &y) in strata.iter().zip(data.column(a)).zip(data.column(b)) {
        counts[(s * ra + x as usize) * rb + y as usize] += 1;
    }
    Ok(g2_from_counts(&counts, q, ra, rb))
}

/// G² over `q` stacked `ra × rb` tables laid out row-major.
pub fn g2_from_counts(counts: &[u64], q: usize, ra: usize, rb: usize) -> G2Result {
    let mut g2 = 0.0;
    let mut dof = 0usize;
    let mut row = vec![0u64; ra];
    let mut col = vec![0u64; rb];
    for s in 0..q {
        let t = &counts[s * ra * rb..(s + 1) * ra * rb];
        row.iter_mut().for_each(|x| *x = 0);
        col.iter_mut().for_each(|x| *x = 0);
        for i in 0..ra {
            for j in 0..rb {
                row[i] += t[i * rb + j];
                col[j] += t[i * rb + j];
            }
        }
        let total: u64 = row.iter().sum();
        if total == 0 {
            continue;
        }
        let nr = row.iter().filter(|&&x| x > 0).count();
        let nc = col.iter().filter(|&&x| x > 0).count();
        dof += (nr - 1) * (nc - 1);
        let tot = total as f64;
        for i in 0..ra {
            for j in 0..rb {
                let o = t[i * rb + j];
                if o > 0 {
                    let o = o as f64;
                    g2 += o * (o * tot / (row[i] as f64 * col[j] as f64)).ln();
                }
            }
        }
    }
    let statistic = (2.0 * g2).max(0.0);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    };
    G2Result {
        statistic,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cells: &[(u32, u32, usize)]) -> DiscreteData {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for &(x, y, c) in cells {
            a.extend(std::iter::repeat_n(x, c));
            b.extend(std::iter::repeat_n(y, c));
        }
        DiscreteData::from_columns(vec!["a".into(), "b".into()], vec![2, 2], vec![a, b]).unwrap()
    }

    #[test]
    fn exact_independence() {
        let d = table(&[(0, 0, 10), (0, 1, 10), (1, 0, 10), (1, 1, 10)]);
        let r = g2_test(&d, 0, 1, &[]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert_eq!(r.dof, 1);
        assert!((r.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_dependence() {
        let d = table(&[(0, 0, 20), (1, 1, 20)]);
        let r = g2_test(&d, 0, 1, &[]).unwrap();
        // each of the 40 observations contributes ln 2
        assert!((r.statistic - 80.0 * 2f64.ln()).abs() < 1e-9);
        assert!((r.statistic - 55.4518).abs() < 1e-4);
        assert!(r.p_value < 1e-12);
    }

    #[test]
    fn conditioning_on_tested_variable_is_rejected() {
        let d = table(&[(0, 0, 2), (1, 1, 2)]);
        assert!(g2_test(&d, 0, 1, &[0]).is_err());
        assert!(g2_test(&d, 0, 0, &[]).is_err());
    }

    #[test]
    fn empty_data_is_rejected() {
        let d = DiscreteData::from_columns(vec!["a".into(), "b".into()], vec![2, 2], vec![vec![], vec![]]).unwrap();
        assert!(g2_test(&d, 0, 1, &[]).is_err());
    }
}
