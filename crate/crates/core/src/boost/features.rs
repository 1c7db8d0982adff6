use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

/// One model input column.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Continuous(Vec<f64>),
    Categorical { values: Vec<u32>, n_levels: usize },
}

impl Feature {
    pub fn len(&self) -> usize {
        match self {
            Feature::Continuous(v) => v.len(),
            Feature::Categorical { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn spec(&self, name: &str) -> FeatureSpec {
        FeatureSpec {
            name: name.to_string(),
            n_levels: match self {
                Feature::Continuous(_) => None,
                Feature::Categorical { n_levels, .. } => Some(*n_levels),
            },
        }
    }
}

/// Name and kind of a model input; `n_levels` is set for categorical inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_levels: Option<usize>,
}

/// Column-major design matrix for boosting.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    features: Vec<Feature>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize) -> Self {
        FeatureMatrix {
            names: Vec::new(),
            features: Vec::new(),
            n_rows,
        }
    }

    /// Named columns of a dataset, with categorical levels taken from the schema.
    pub fn from_dataset(ds: &Dataset, columns: &[String]) -> Result<Self> {
        let mut m = FeatureMatrix::new(ds.n_rows());
        for name in columns {
            let i = ds.column_index(name)?;
            let feature = match &ds.columns()[i] {
                Column::Continuous(v) => Feature::Continuous(v.clone()),
                Column::Categorical(v) => Feature::Categorical {
                    values: v.clone(),
                    n_levels: ds.schema().vars()[i].levels.len(),
                },
            };
            m.push(name, feature)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, name: &str, feature: Feature) -> Result<()> {
        if feature.len() != self.n_rows {
            return Err(Error::Invalid(format!(
                "feature `{name}` has {} rows, expected {}",
                feature.len(),
                self.n_rows
            )));
        }
        if let Feature::Categorical { values, n_levels } = &feature {
            if values.iter().any(|&v| v as usize >= *n_levels) {
                return Err(Error::Invalid(format!("feature `{name}` has a level out of range")));
            }
        }
        if let Feature::Continuous(v) = &feature {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!("feature `{name}` has a non-finite value")));
            }
        }
        self.names.push(name.to_string());
        self.features.push(feature);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn feature(&self, f: usize) -> &Feature {
        &self.features[f]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Column(name.to_string()))
    }

    pub fn specs(&self) -> Vec<FeatureSpec> {
        self.names.iter().zip(&self.features).map(|(n, f)| f.spec(n)).collect()
    }

    /// Copy with feature `f` replaced by a column of `value` (a level index
    /// for categorical features).
    pub fn with_constant(&self, f: usize, value: f64) -> FeatureMatrix {
        let mut out = self.clone();
        out.features[f] = match &self.features[f] {
            Feature::Continuous(_) => Feature::Continuous(vec![value; self.n_rows]),
            Feature::Categorical { n_levels, .. } => Feature::Categorical {
                values: vec![value as u32; self.n_rows],
                n_levels: *n_levels,
            },
        };
        out
    }

    /// Distinct rows: representative row numbers (first occurrence order) and,
    /// for every row, the index of its representative.
    pub fn unique_rows(&self) -> (Vec<usize>, Vec<usize>) {
        let mut reps = Vec::new();
        let mut first = |i: usize, slot: &mut usize| {
            if *slot == usize::MAX {
                *slot = reps.len();
                reps.push(i);
            }
            *slot
        };
        let inverse = match self.categorical_codes() {
            // small code space: direct table
            Some((codes, space)) if space <= 1 << 16 => {
                let mut table = vec![usize::MAX; space];
                codes.iter().enumerate().map(|(i, &c)| first(i, &mut table[c as usize])).collect()
            }
            Some((codes, _)) => {
                let mut index: HashMap<u64, usize> = HashMap::new();
                codes
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| first(i, index.entry(c).or_insert(usize::MAX)))
                    .collect()
            }
            None => {
                let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
                (0..self.n_rows)
                    .map(|i| {
                        let key: Vec<u64> = self
                            .features
                            .iter()
                            .map(|f| match f {
                                Feature::Continuous(v) => v[i].to_bits(),
                                Feature::Categorical { values, .. } => u64::from(values[i]),
                            })
                            .collect();
                        first(i, index.entry(key).or_insert(usize::MAX))
                    })
                    .collect()
            }
        };
        (reps, inverse)
    }

    /// Mixed-radix row codes and the size of the code space, when every
    /// feature is categorical and the space fits in a `u64`.
    fn categorical_codes(&self) -> Option<(Vec<u64>, usize)> {
        let mut space: u64 = 1;
        let mut codes = vec![0u64; self.n_rows];
        for f in &self.features {
            let Feature::Categorical { values, n_levels } = f else {
                return None;
            };
            let radix = *n_levels as u64;
            space = space.checked_mul(radix)?;
            for (c, &v) in codes.iter_mut().zip(values) {
                *c = *c * radix + u64::from(v);
            }
        }
        Some((codes, usize::try_from(space).ok()?))
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let features = self
            .features
            .iter()
            .map(|f| match f {
                Feature::Continuous(v) => Feature::Continuous(rows.iter().map(|&r| v[r]).collect()),
                Feature::Categorical { values, n_levels } => Feature::Categorical {
                    values: rows.iter().map(|&r| values[r]).collect(),
                    n_levels: *n_levels,
                },
            })
            .collect();
        FeatureMatrix {
            names: self.names.clone(),
            features,
            n_rows: rows.len(),
        }
    }
}

/// Training-time discretization of one feature into at most 256 bins.
#[derive(Debug, Clone)]
pub(crate) struct Binned {
    pub codes: Vec<u16>,
    pub n_bins: usize,
    /// Upper edge of each bin but the last (continuous features only).
    pub cuts: Vec<f64>,
    pub categorical: bool,
}

pub(crate) const MAX_BINS: usize = 256;

pub(crate) fn bin_feature(f: &Feature) -> Binned {
    match f {
        Feature::Categorical { values, n_levels } => Binned {
            codes: values.iter().map(|&v| v as u16).collect(),
            n_bins: *n_levels,
            cuts: Vec::new(),
            categorical: true,
        },
        Feature::Continuous(v) => {
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            let mut uniq = sorted.clone();
            uniq.dedup();
            let cuts: Vec<f64> = if uniq.len() <= MAX_BINS {
                uniq[..uniq.len().saturating_sub(1)].to_vec()
            } else {
                let mut c: Vec<f64> = (1..MAX_BINS)
                    .map(|i| crate::stats::quantile_sorted(&sorted, i as f64 / MAX_BINS as f64))
                    .collect();
                c.dedup();
                // the top cut must leave a non-empty last bin
                c.retain(|&x| x < uniq[uniq.len() - 1]);
                c
            };
            let codes = v.iter().map(|&x| crate::data::bin_index(x, &cuts) as u16).collect();
            Binned {
                codes,
                n_bins: cuts.len() + 1,
                cuts,
                categorical: false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn few_unique_values_get_their_own_bins() {
        let b = bin_feature(&Feature::Continuous(vec![3.0, 1.0, 2.0, 1.0]));
        assert_eq!(b.cuts, vec![1.0, 2.0]);
        assert_eq!(b.codes, vec![2, 0, 1, 0]);
    }

    #[test]
    fn many_values_use_quantile_cuts() {
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        let b = bin_feature(&Feature::Continuous(v));
        assert!(b.n_bins <= MAX_BINS);
        assert!(b.cuts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b.codes[0], 0);
        assert_eq!(b.codes[9999] as usize, b.n_bins - 1);
    }

    #[test]
    fn length_and_level_checks() {
        let mut m = FeatureMatrix::new(2);
        assert!(m.push("a", Feature::Continuous(vec![1.0])).is_err());
        assert!(m.push("b", Feature::Categorical { values: vec![0, 2], n_levels: 2 }).is_err());
        m.push("c", Feature::Categorical { values: vec![0, 1], n_levels: 2 }).unwrap();
        let k = m.with_constant(0, 1.0);
        assert_eq!(k.feature(0), &Feature::Categorical { values: vec![1, 1], n_levels: 2 });
    }
}
