use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

/// Rows of a dataset whose treatment is one of two levels, with a binary
/// indicator (`1` for the treated level).
#[derive(Debug, Clone)]
pub struct TreatmentPair {
    pub treated_level: String,
    pub control_level: String,
    pub data: Dataset,
    pub indicator: Vec<u8>,
    /// Row numbers in the source dataset, in order.
    pub source_rows: Vec<usize>,
}

impl TreatmentPair {
    pub fn n_rows(&self) -> usize {
        self.indicator.len()
    }

    pub fn n_treated(&self) -> usize {
        self.indicator.iter().filter(|&&t| t == 1).count()
    }

    pub fn n_control(&self) -> usize {
        self.n_rows() - self.n_treated()
    }

    /// Subset (with possible repeats) of this pair's rows.
    pub fn select_rows(&self, rows: &[usize]) -> TreatmentPair {
        TreatmentPair {
            treated_level: self.treated_level.clone(),
            control_level: self.control_level.clone(),
            data: self.data.select_rows(rows),
            indicator: rows.iter().map(|&r| self.indicator[r]).collect(),
            source_rows: rows.iter().map(|&r| self.source_rows[r]).collect(),
        }
    }

    /// Outcome as 0/1, using the outcome level labelled `"1"`.
    pub fn binary_outcome(&self) -> Result<Vec<u8>> {
        let spec = self.data.schema().outcome();
        let one = spec.level_index("1").ok_or_else(|| {
            Error::Invalid(format!("outcome `{}` has no level \"1\"", spec.name))
        })? as u32;
        if spec.levels.len() != 2 {
            return Err(Error::Invalid(format!("outcome `{}` is not binary", spec.name)));
        }
        Ok(self
            .data
            .categorical(&spec.name)?
            .iter()
            .map(|&v| u8::from(v == one))
            .collect())
    }
}

/// Restricts `ds` to two treatment levels; row order is preserved.
pub fn split_treatment_pair(ds: &Dataset, treated: &str, control: &str) -> Result<TreatmentPair> {
    if treated == control {
        return Err(Error::Invalid(format!(
            "treated and control levels are both `{treated}`"
        )));
    }
    let spec = ds.schema().treatment();
    let col = ds.categorical(&spec.name)?;
    let lt = spec
        .level_index(treated)
        .ok_or_else(|| Error::Invalid(format!("`{treated}` is not a level of `{}`", spec.name)))?
        as u32;
    let lc = spec
        .level_index(control)
        .ok_or_else(|| Error::Invalid(format!("`{control}` is not a level of `{}`", spec.name)))?
        as u32;
    let rows: Vec<usize> = (0..col.len())
        .filter(|&i| col[i] == lt || col[i] == lc)
        .collect();
    let indicator: Vec<u8> = rows.iter().map(|&i| u8::from(col[i] == lt)).collect();
    let n_t = indicator.iter().filter(|&&t| t == 1).count();
    if n_t == 0 {
        return Err(Error::EmptyArm(format!("no rows at treated level `{treated}`")));
    }
    if n_t == indicator.len() {
        return Err(Error::EmptyArm(format!("no rows at control level `{control}`")));
    }
    Ok(TreatmentPair {
        treated_level: treated.to_string(),
        control_level: control.to_string(),
        data: ds.select_rows(&rows),
        indicator,
        source_rows: rows,
    })
}
