use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Treatment,
    Outcome,
    Covariate,
}

/// One entry of a schema manifest.
///
/// A categorical variable lists its `levels` in order. A continuous variable
/// may carry `cuts` and `labels`, in which case [`Dataset::discretize_declared`]
/// turns it into a categorical variable with those labels. Bins are
/// left-open and right-closed: a value lands in the first bin whose upper cut
/// is `>= value`.
///
/// [`Dataset::discretize_declared`]: crate::data::Dataset::discretize_declared
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: Kind,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cuts: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    /// Lower end of the first bin, when known. Values below it are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
}

impl VariableSpec {
    pub fn categorical(name: &str, role: Role, levels: &[&str]) -> Self {
        VariableSpec {
            name: name.to_string(),
            kind: Kind::Categorical,
            role,
            levels: levels.iter().map(|s| s.to_string()).collect(),
            cuts: Vec::new(),
            labels: Vec::new(),
            lower: None,
        }
    }

    pub fn continuous(name: &str, role: Role) -> Self {
        VariableSpec {
            name: name.to_string(),
            kind: Kind::Continuous,
            role,
            levels: Vec::new(),
            cuts: Vec::new(),
            labels: Vec::new(),
            lower: None,
        }
    }

    pub fn with_cuts(mut self, cuts: &[f64], labels: &[&str]) -> Self {
        self.cuts = cuts.to_vec();
        self.labels = labels.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }

    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if name.is_empty() {
            return Err(Error::Schema("empty variable name".into()));
        }
        match self.kind {
            Kind::Categorical => {
                if self.levels.len() < 2 {
                    return Err(Error::Schema(format!("`{name}` needs at least 2 levels")));
                }
                check_unique(name, &self.levels)?;
                if !self.cuts.is_empty() {
                    return Err(Error::Schema(format!(
                        "`{name}` is categorical and cannot carry cut points"
                    )));
                }
            }
            Kind::Continuous => {
                if !self.levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "`{name}` is continuous and cannot list levels"
                    )));
                }
                if !self.cuts.is_empty() || !self.labels.is_empty() {
                    validate_cuts(name, &self.cuts, &self.labels)?;
                }
            }
        }
        Ok(())
    }
}

fn check_unique(name: &str, labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Schema(format!("`{name}` repeats level `{l}`")));
        }
    }
    Ok(())
}

pub(crate) fn validate_cuts(name: &str, cuts: &[f64], labels: &[String]) -> Result<()> {
    if cuts.is_empty() {
        return Err(Error::Schema(format!("`{name}` needs at least one cut point")));
    }
    if cuts.iter().any(|c| !c.is_finite()) {
        return Err(Error::Schema(format!("`{name}` has a non-finite cut point")));
    }
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Schema(format!(
            "cut points of `{name}` must be strictly ascending"
        )));
    }
    if labels.len() != cuts.len() + 1 {
        return Err(Error::Schema(format!(
            "`{name}`: {} cut points need {} labels, got {}",
            cuts.len(),
            cuts.len() + 1,
            labels.len()
        )));
    }
    check_unique(name, labels)
}

/// Ordered list of variables; exactly one treatment and one outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    vars: Vec<VariableSpec>,
}

impl Schema {
    pub fn new(vars: Vec<VariableSpec>) -> Result<Self> {
        let schema = Schema { vars };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let vars: Vec<VariableSpec> = serde_json::from_str(text)?;
        Schema::new(vars)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.vars).expect("schema serializes")
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for v in &self.vars {
            v.validate()?;
            if !names.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
            }
        }
        for role in [Role::Treatment, Role::Outcome] {
            let count = self.vars.iter().filter(|v| v.role == role).count();
            if count != 1 {
                return Err(Error::Schema(format!(
                    "exactly one {role:?} variable required, found {count}"
                )));
            }
        }
        Ok(())
    }

    pub fn vars(&self) -> &[VariableSpec] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&VariableSpec> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn treatment(&self) -> &VariableSpec {
        self.vars
            .iter()
            .find(|v| v.role == Role::Treatment)
            .expect("validated schema has a treatment")
    }

    pub fn outcome(&self) -> &VariableSpec {
        self.vars
            .iter()
            .find(|v| v.role == Role::Outcome)
            .expect("validated schema has an outcome")
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.vars
            .iter()
            .filter(|v| v.role == Role::Covariate)
            .map(|v| v.name.clone())
            .collect()
    }

    pub(crate) fn replace(&mut self, idx: usize, spec: VariableSpec) {
        self.vars[idx] = spec;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Vec<VariableSpec> {
        vec![
            VariableSpec::categorical("PMR", Role::Treatment, &["Low", "Med", "High"]),
            VariableSpec::categorical("Safety", Role::Outcome, &["0", "1"]),
            VariableSpec::continuous("ADT", Role::Covariate),
        ]
    }

    #[test]
    fn accepts_well_formed() {
        let s = Schema::new(base()).unwrap();
        assert_eq!(s.treatment().name, "PMR");
        assert_eq!(s.covariate_names(), vec!["ADT".to_string()]);
    }

    #[test]
    fn rejects_two_treatments() {
        let mut v = base();
        v[2].role = Role::Treatment;
        assert!(matches!(Schema::new(v), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_single_level_and_duplicates() {
        let mut v = base();
        v[1].levels = vec!["1".into()];
        assert!(Schema::new(v).is_err());
        let mut v = base();
        v[1].levels = vec!["1".into(), "1".into()];
        assert!(Schema::new(v).is_err());
    }

    #[test]
    fn rejects_unsorted_cuts_and_bad_label_count() {
        let mut v = base();
        v[2] = VariableSpec::continuous("ADT", Role::Covariate).with_cuts(&[5.0, 3.0], &["a", "b", "c"]);
        assert!(Schema::new(v).is_err());
        let mut v = base();
        v[2] = VariableSpec::continuous("ADT", Role::Covariate).with_cuts(&[3.0], &["a"]);
        assert!(Schema::new(v).is_err());
    }

    #[test]
    fn manifest_json_shape() {
        let json = r#"[
            {"name": "PMR", "kind": "continuous", "role": "treatment",
             "cuts": [200, 280], "labels": ["Low", "Medium", "High"], "lower": 139},
            {"name": "Safety", "kind": "categorical", "role": "outcome", "levels": ["0", "1"]}
        ]"#;
        let vars: Vec<VariableSpec> = serde_json::from_str(json).unwrap();
        let s = Schema::new(vars).unwrap();
        assert_eq!(s.treatment().cuts, vec![200.0, 280.0]);
        assert_eq!(s.treatment().lower, Some(139.0));
    }
}
