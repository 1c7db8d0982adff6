use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boost::BoostConfig;
use crate::error::{Error, Result};
use crate::inference::{Weighting, DEFAULT_DRAWS};
use crate::po::{Comparison, Method, PoConfig, DEFAULT_CALIPER, DEFAULT_PERMUTATIONS};
use crate::structure::StructureConfig;

fn default_outcome_boost() -> BoostConfig {
    PoConfig::default().outcome
}

fn default_caliper() -> f64 {
    DEFAULT_CALIPER
}

fn default_bootstrap() -> usize {
    PoConfig::default().bootstrap
}

fn default_level() -> f64 {
    0.95
}

fn default_draws() -> usize {
    DEFAULT_DRAWS
}

fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

/// One analysis run, read from JSON. Relative paths are resolved against
/// the directory holding the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub output_dir: PathBuf,
    /// `(treated, control)` treatment-level pairs.
    pub comparisons: Vec<Comparison>,
    pub methods: Vec<Method>,
    /// Adjustment set; every schema covariate when absent.
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
    #[serde(default)]
    pub propensity: BoostConfig,
    #[serde(default = "default_outcome_boost")]
    pub outcome: BoostConfig,
    /// Matching caliper in standard deviations of logit π.
    #[serde(default = "default_caliper")]
    pub caliper: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Interval coverage for the bootstrap.
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub structure: StructureConfig,
    #[serde(default = "default_draws")]
    pub posterior_draws: usize,
    #[serde(default)]
    pub weighting: Weighting,
    /// Permutations behind each balance p-value.
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    pub seed: u64,
}

impl StudyConfig {
    /// Minimal configuration with library defaults elsewhere.
    pub fn new(
        data: impl Into<PathBuf>,
        schema: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
        comparisons: Vec<Comparison>,
        methods: Vec<Method>,
        seed: u64,
    ) -> Self {
        StudyConfig {
            data: data.into(),
            schema: schema.into(),
            output_dir: output_dir.into(),
            comparisons,
            methods,
            covariates: None,
            propensity: BoostConfig::default(),
            outcome: default_outcome_boost(),
            caliper: DEFAULT_CALIPER,
            bootstrap: default_bootstrap(),
            level: default_level(),
            structure: StructureConfig::default(),
            posterior_draws: DEFAULT_DRAWS,
            weighting: Weighting::default(),
            permutations: DEFAULT_PERMUTATIONS,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, validates and resolves paths relative to the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = StudyConfig::from_json(&text)?;
        Ok(cfg.resolved(path.parent().unwrap_or(Path::new(""))))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolved(mut self, base: &Path) -> Self {
        for p in [&mut self.data, &mut self.schema, &mut self.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.comparisons.is_empty() {
            return Err(Error::Invalid("at least one comparison is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Invalid("at least one method is required".into()));
        }
        let unique: BTreeSet<_> = self.methods.iter().collect();
        if unique.len() != self.methods.len() {
            return Err(Error::Invalid("methods are listed more than once".into()));
        }
        let unique: BTreeSet<_> = self.comparisons.iter().collect();
        if unique.len() != self.comparisons.len() {
            return Err(Error::Invalid("comparisons are listed more than once".into()));
        }
        for c in &self.comparisons {
            if c.treated == c.control {
                return Err(Error::Invalid(format!("comparison `{}` uses one level twice", c.label())));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Invalid(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if !(self.caliper > 0.0) {
            return Err(Error::Invalid(format!("caliper must be positive, got {}", self.caliper)));
        }
        if self.bootstrap == 1 {
            return Err(Error::Invalid("bootstrap must be 0 or at least 2".into()));
        }
        if self.methods.contains(&Method::Cbn) && self.posterior_draws == 0 {
            return Err(Error::Invalid("posterior_draws must be positive".into()));
        }
        Ok(())
    }

    pub fn po_config(&self) -> PoConfig {
        PoConfig {
            propensity: self.propensity,
            outcome: self.outcome,
            caliper: self.caliper,
            bootstrap: self.bootstrap,
            level: self.level,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "data": "data.csv", "schema": "schema.json", "output_dir": "out",
        "comparisons": [{"treated": "Low", "control": "High"}],
        "methods": ["ipw_combined", "cbn"], "seed": 7
    }"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = StudyConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.bootstrap, 1000);
        assert_eq!(cfg.posterior_draws, 2000);
        assert_eq!(cfg.outcome.cv_folds, 10);
        assert_eq!(cfg.structure.k, 10);
        let back = StudyConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace(r#", "seed": 7"#, "");
        assert!(StudyConfig::from_json(&text).is_err());
    }

    #[test]
    fn empty_lists_and_unknown_fields_rejected() {
        assert!(StudyConfig::from_json(&MINIMAL.replace(r#"["ipw_combined", "cbn"]"#, "[]")).is_err());
        assert!(StudyConfig::from_json(&MINIMAL.replace(r#"[{"treated": "Low", "control": "High"}]"#, "[]")).is_err());
        assert!(StudyConfig::from_json(&MINIMAL.replace(r#""seed": 7"#, r#""seed": 7, "extra": 1"#)).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let cfg = StudyConfig::from_json(MINIMAL).unwrap().resolved(Path::new("/study"));
        assert_eq!(cfg.data, Path::new("/study/data.csv"));
        assert_eq!(cfg.output_dir, Path::new("/study/out"));
    }
}
