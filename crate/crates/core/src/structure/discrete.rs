use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::structure::Dag;

/// All-categorical view of a dataset: one level-index column per variable.
#[derive(Debug, Clone)]
pub struct DiscreteData {
    names: Vec<String>,
    cards: Vec<usize>,
    levels: Vec<Vec<String>>,
    columns: Vec<Vec<u32>>,
    n_rows: usize,
}

impl DiscreteData {
    pub fn new(ds: &Dataset) -> Result<Self> {
        let mut columns = Vec::with_capacity(ds.columns().len());
        for (spec, col) in ds.schema().vars().iter().zip(ds.columns()) {
            match col {
                Column::Categorical(v) => columns.push(v.clone()),
                Column::Continuous(_) => {
                    return Err(Error::Invalid(format!(
                        "`{}` is continuous; discrete models need categorical data",
                        spec.name
                    )))
                }
            }
        }
        Ok(DiscreteData {
            names: ds.schema().vars().iter().map(|v| v.name.clone()).collect(),
            cards: ds.schema().vars().iter().map(|v| v.levels.len()).collect(),
            levels: ds.schema().vars().iter().map(|v| v.levels.clone()).collect(),
            columns,
            n_rows: ds.n_rows(),
        })
    }

    pub fn from_columns(names: Vec<String>, cards: Vec<usize>, columns: Vec<Vec<u32>>) -> Result<Self> {
        if names.len() != cards.len() || names.len() != columns.len() {
            return Err(Error::Invalid("names, cardinalities and columns differ in length".into()));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (i, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::Invalid(format!("column `{}` has a ragged length", names[i])));
            }
            if cards[i] == 0 || col.iter().any(|&x| x as usize >= cards[i]) {
                return Err(Error::Invalid(format!("column `{}` exceeds its cardinality", names[i])));
            }
        }
        let levels = cards
            .iter()
            .map(|&r| (0..r).map(|k| k.to_string()).collect())
            .collect();
        Ok(DiscreteData {
            names,
            cards,
            levels,
            columns,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    /// Level labels per variable (`"0"`, `"1"`, ... when built from raw columns).
    pub fn levels(&self) -> &[Vec<String>] {
        &self.levels
    }

    pub fn column(&self, v: usize) -> &[u32] {
        &self.columns[v]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Data column for each node of `g`, matched by name.
    pub fn align(&self, g: &Dag) -> Result<Vec<usize>> {
        g.nodes().iter().map(|n| self.index_of(n)).collect()
    }

    /// Same data with the columns reordered to follow `g`'s nodes.
    pub fn aligned_to(&self, g: &Dag) -> Result<DiscreteData> {
        let idx = self.align(g)?;
        Ok(DiscreteData {
            names: idx.iter().map(|&i| self.names[i].clone()).collect(),
            cards: idx.iter().map(|&i| self.cards[i]).collect(),
            levels: idx.iter().map(|&i| self.levels[i].clone()).collect(),
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            n_rows: self.n_rows,
        })
    }

    /// Number of joint configurations of `vars`, checked against `cap`.
    pub fn n_configs(&self, vars: &[usize], cap: usize) -> Result<usize> {
        let mut q: u128 = 1;
        for &v in vars {
            q *= self.cards[v] as u128;
            if q > cap as u128 {
                return Err(Error::StateSpace {
                    size: vars.iter().map(|&v| self.cards[v] as u128).product(),
                    cap: cap as u128,
                });
            }
        }
        Ok(q as usize)
    }

    /// Mixed-radix configuration index of `vars` for every row (first variable
    /// most significant).
    pub fn config_indices(&self, vars: &[usize]) -> Vec<usize> {
        let mut idx = vec![0usize; self.n_rows];
        for &v in vars {
            let r = self.cards[v];
            for (slot, &x) in idx.iter_mut().zip(&self.columns[v]) {
                *slot = *slot * r + x as usize;
            }
        }
        idx
    }
}
