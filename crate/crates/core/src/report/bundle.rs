use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::po::{AceEstimate, BalanceReport, Comparison, Method};
use crate::structure::Dag;

/// What produced a bundle; no timestamps, so reruns compare byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub schema_sha256: String,
    pub data_sha256: String,
    /// Hash over the three inputs together.
    pub inputs_sha256: String,
}

impl Provenance {
    pub fn new(seed: u64, config: &[u8], schema: &[u8], data: &[u8]) -> Self {
        let mut all = Sha256::new();
        for part in [config, schema, data] {
            all.update((part.len() as u64).to_le_bytes());
            all.update(part);
        }
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_sha256: sha256_hex(config),
            schema_sha256: sha256_hex(schema),
            data_sha256: sha256_hex(data),
            inputs_sha256: hex::encode(all.finalize()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A requested (comparison, method) cell that produced no estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub comparison: Comparison,
    pub method: Method,
    pub error: String,
}

/// A learned network with its score and model-averaging weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    /// 1 for the best-scoring network.
    pub rank: usize,
    pub score: f64,
    pub weight: f64,
    pub dag: Dag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub provenance: Provenance,
    pub estimates: Vec<AceEstimate>,
    pub failures: Vec<FailureRecord>,
    pub balance: Vec<BalanceReport>,
    pub networks: Vec<NetworkRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ResultBundle {
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ResultBundle::from_json(&text)
    }

    pub fn estimate(&self, comparison: &Comparison, method: Method) -> Option<&AceEstimate> {
        self.estimates
            .iter()
            .find(|e| &e.comparison == comparison && e.method == method)
    }

    /// Whether every requested cell appears exactly once, as an estimate or
    /// as a failure.
    pub fn is_complete(&self, comparisons: &[Comparison], methods: &[Method]) -> bool {
        let delivered = self.estimates.len() + self.failures.len();
        delivered == comparisons.len() * methods.len()
            && comparisons.iter().all(|c| {
                methods.iter().all(|&m| {
                    let hits = self.estimates.iter().filter(|e| &e.comparison == c && e.method == m).count()
                        + self.failures.iter().filter(|f| &f.comparison == c && f.method == m).count();
                    hits == 1
                })
            })
    }
}
