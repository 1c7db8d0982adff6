use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv_from, split_treatment_pair, Dataset, Role, Schema};
use crate::error::{Error, Result};
use crate::inference::{averaged_posterior_ace, model_weights};
use crate::oracle::{oracle_do_ace, oracle_do_prob, oracle_naive_ratio, sample_dataset, GroundTruth};
use crate::po::{estimate_po, ipw_balance, AceEstimate, Method, BALANCE_ALPHA};
use crate::report::bundle::{FailureRecord, NetworkRecord, Provenance, ResultBundle};
use crate::report::config::StudyConfig;
use crate::report::svg::{render_balance_svg, render_ci_overlap_svg};
use crate::rng::substream;
use crate::structure::{learn_structure, DiscreteData, PdagRecord, ScoredNetwork, StructureConfig};

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Keeps file names portable whatever the level labels contain.
fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Interventional quantities of one ordered pair of treatment levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEffect {
    pub treated: String,
    pub control: String,
    /// `P(S = 1 | do(T = treated)) / P(S = 1 | do(T = control))`.
    pub risk_ratio: f64,
    pub p_treated: f64,
    pub p_control: f64,
    /// Unadjusted population ratio, for contrast.
    pub naive_risk_ratio: f64,
}

/// Sidecar written next to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSidecar {
    pub treatment: String,
    pub outcome: String,
    pub n: usize,
    pub seed: u64,
    pub effects: Vec<OracleEffect>,
}

impl OracleSidecar {
    pub fn effect(&self, treated: &str, control: &str) -> Option<&OracleEffect> {
        self.effects.iter().find(|e| e.treated == treated && e.control == control)
    }
}

/// Exact effects for every ordered pair of distinct treatment levels.
pub fn oracle_effects(gt: &GroundTruth) -> Result<Vec<OracleEffect>> {
    let levels = gt.treatment_levels().to_vec();
    let probs: Vec<f64> = levels.iter().map(|l| oracle_do_prob(gt, l)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, treated) in levels.iter().enumerate() {
        for (j, control) in levels.iter().enumerate() {
            if i != j {
                out.push(OracleEffect {
                    treated: treated.clone(),
                    control: control.clone(),
                    risk_ratio: oracle_do_ace(gt, treated, control)?,
                    p_treated: probs[i],
                    p_control: probs[j],
                    naive_risk_ratio: oracle_naive_ratio(gt, treated, control)?,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub oracle: PathBuf,
    pub truth: PathBuf,
}

/// Samples `n` rows from a ground truth (the bundled one when `truth` is
/// `None`) and writes `data.csv`, `schema.json`, `truth.json` and
/// `oracle.json` into `out`.
pub fn cmd_simulate(truth: Option<&Path>, n: usize, seed: u64, out: &Path) -> Result<SimulateOutput> {
    if n == 0 {
        return Err(Error::Invalid("sample size must be at least 1".into()));
    }
    let gt = match truth {
        Some(path) => GroundTruth::from_json_file(path)?,
        None => GroundTruth::default_truth(),
    };
    let ds = sample_dataset(&gt, n, seed)?;
    let sidecar = OracleSidecar {
        treatment: gt.treatment.clone(),
        outcome: gt.outcome.clone(),
        n,
        seed,
        effects: oracle_effects(&gt)?,
    };
    create_dir(out)?;
    let paths = SimulateOutput {
        data: out.join("data.csv"),
        schema: out.join("schema.json"),
        oracle: out.join("oracle.json"),
        truth: out.join("truth.json"),
    };
    ds.write_csv(&paths.data)?;
    write_file(&paths.schema, gt.schema().to_json_pretty() + "\n")?;
    write_file(&paths.truth, gt.to_json_pretty() + "\n")?;
    write_file(&paths.oracle, to_json(&sidecar))?;
    Ok(paths)
}

/// Exit status of an `estimate` run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Every requested cell produced an estimate.
    Complete,
    /// At least one cell carries a failure record.
    Partial,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Complete => 0,
            RunStatus::Partial => 1,
        }
    }
}

/// Exit code for input that could not be used at all.
pub const EXIT_UNUSABLE: i32 = 2;

#[derive(Debug, Clone)]
pub struct EstimateRun {
    pub bundle: ResultBundle,
    pub status: RunStatus,
    pub files: Vec<PathBuf>,
}

/// Loads the study inputs, runs every requested method and writes the
/// bundle and figures. Errors mean the input was unusable; single-method
/// failures are recorded in the bundle instead.
pub fn cmd_estimate(config_path: &Path) -> Result<EstimateRun> {
    let config_bytes = read_bytes(config_path)?;
    let text = std::str::from_utf8(&config_bytes)
        .map_err(|_| Error::Invalid(format!("{} is not UTF-8", config_path.display())))?;
    let cfg = StudyConfig::from_json(text)?.resolved(config_path.parent().unwrap_or(Path::new("")));
    let bundle = run_study(&cfg, &config_bytes)?;
    let status = if bundle.failures.is_empty() {
        RunStatus::Complete
    } else {
        RunStatus::Partial
    };
    create_dir(&cfg.output_dir)?;
    let bundle_path = cfg.output_dir.join("bundle.json");
    write_file(&bundle_path, bundle.to_json_pretty())?;
    let mut files = vec![bundle_path];
    files.extend(write_figures(&bundle, &cfg.output_dir)?);
    Ok(EstimateRun { bundle, status, files })
}

/// Re-renders the figures of a saved bundle.
pub fn cmd_render(bundle_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let bundle = ResultBundle::from_file(bundle_path)?;
    create_dir(out)?;
    write_figures(&bundle, out)
}

/// `balance_<pair>.svg` per balance table, `ci_overlap.svg` when any
/// estimate exists, `dag_<rank>.dot` per network.
pub fn write_figures(bundle: &ResultBundle, out: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for b in &bundle.balance {
        let label = b.comparison.label();
        let title = format!("Covariate balance, {} vs {}", b.comparison.treated, b.comparison.control);
        let path = out.join(format!("balance_{}.svg", file_stem(&label)));
        write_file(&path, render_balance_svg(&b.rows, &title, BALANCE_ALPHA)?)?;
        files.push(path);
    }
    if !bundle.estimates.is_empty() {
        let path = out.join("ci_overlap.svg");
        write_file(&path, render_ci_overlap_svg(&bundle.estimates)?)?;
        files.push(path);
    }
    for net in &bundle.networks {
        let path = out.join(format!("dag_{}.dot", net.rank));
        write_file(&path, net.dag.to_dot())?;
        files.push(path);
    }
    Ok(files)
}

fn load_inputs(cfg: &StudyConfig) -> Result<(Dataset, Vec<u8>, Vec<u8>, usize)> {
    let schema_bytes = read_bytes(&cfg.schema)?;
    let schema_text = std::str::from_utf8(&schema_bytes)
        .map_err(|_| Error::Schema(format!("{} is not UTF-8", cfg.schema.display())))?;
    let schema = Schema::from_json(schema_text)?;
    let data_bytes = read_bytes(&cfg.data)?;
    let load = load_csv_from(data_bytes.as_slice(), &schema)?;
    Ok((load.dataset, schema_bytes, data_bytes, load.dropped))
}

fn adjustment_set(cfg: &StudyConfig, schema: &Schema) -> Result<Vec<String>> {
    let covariates = cfg.covariates.clone().unwrap_or_else(|| schema.covariate_names());
    for name in &covariates {
        match schema.get(name) {
            None => return Err(Error::Column(name.clone())),
            Some(spec) if spec.role != Role::Covariate => {
                return Err(Error::Invalid(format!("`{name}` is not a covariate")))
            }
            Some(_) => {}
        }
    }
    Ok(covariates)
}

/// Runs the analysis described by `cfg` without writing anything.
/// `config_bytes` feeds the provenance hash.
pub fn run_study(cfg: &StudyConfig, config_bytes: &[u8]) -> Result<ResultBundle> {
    cfg.validate()?;
    let (ds, schema_bytes, data_bytes, dropped) = load_inputs(cfg)?;
    let schema = ds.schema().clone();
    let covariates = adjustment_set(cfg, &schema)?;
    let mut warnings = Vec::new();
    if dropped > 0 {
        warnings.push(format!("{dropped} rows with missing cells were dropped"));
    }

    let po_methods: Vec<Method> = cfg.methods.iter().copied().filter(|&m| m != Method::Cbn).collect();
    let po_cfg = cfg.po_config();
    let mut cells: BTreeMap<(usize, Method), Result<AceEstimate>> = BTreeMap::new();
    let mut balance = Vec::new();
    let mut runnable = 0;
    for (ci, c) in cfg.comparisons.iter().enumerate() {
        let pair = match split_treatment_pair(&ds, &c.treated, &c.control) {
            Ok(pair) => pair,
            Err(e) => {
                for &m in &cfg.methods {
                    cells.insert((ci, m), Err(Error::Shared(e.to_string())));
                }
                continue;
            }
        };
        runnable += 1;
        if po_methods.is_empty() {
            continue;
        }
        let seed: u64 = substream(cfg.seed, ci as u64).random();
        for (m, est) in estimate_po(&pair, &covariates, &po_cfg, &po_methods, seed) {
            cells.insert((ci, m), est);
        }
        match ipw_balance(&pair, &covariates, &po_cfg, cfg.permutations, seed) {
            Ok(b) => balance.push(b),
            Err(e) => warnings.push(format!("balance table for {}: {e}", c.label())),
        }
    }
    if runnable == 0 {
        return Err(Error::Invalid("none of the requested comparisons can be formed from the data".into()));
    }

    let mut networks = Vec::new();
    if cfg.methods.contains(&Method::Cbn) {
        match run_cbn(cfg, &ds, &covariates) {
            Ok((estimates, nets, cbn_warnings)) => {
                for (ci, est) in estimates.into_iter().enumerate() {
                    cells.entry((ci, Method::Cbn)).or_insert(est);
                }
                networks = nets;
                warnings.extend(cbn_warnings);
            }
            Err(e) => {
                for ci in 0..cfg.comparisons.len() {
                    cells.entry((ci, Method::Cbn)).or_insert_with(|| Err(Error::Shared(e.to_string())));
                }
            }
        }
    }

    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for (ci, c) in cfg.comparisons.iter().enumerate() {
        for &m in &cfg.methods {
            match cells.remove(&(ci, m)) {
                Some(Ok(est)) => estimates.push(est),
                Some(Err(e)) => failures.push(FailureRecord {
                    comparison: c.clone(),
                    method: m,
                    error: e.to_string(),
                }),
                None => failures.push(FailureRecord {
                    comparison: c.clone(),
                    method: m,
                    error: "method did not run".into(),
                }),
            }
        }
    }
    Ok(ResultBundle {
        provenance: Provenance::new(cfg.seed, config_bytes, &schema_bytes, &data_bytes),
        estimates,
        failures,
        balance,
        networks,
        warnings,
    })
}

type CbnRun = (Vec<Result<AceEstimate>>, Vec<NetworkRecord>, Vec<String>);

/// Structure learning once on the discretized data, then a model-averaged
/// interventional risk ratio per comparison.
fn run_cbn(cfg: &StudyConfig, ds: &Dataset, covariates: &[String]) -> Result<CbnRun> {
    let schema = ds.schema();
    let treatment = schema.treatment().name.clone();
    let outcome = schema.outcome().name.clone();
    let mut columns = covariates.to_vec();
    columns.push(treatment.clone());
    columns.push(outcome.clone());
    let discrete = ds.select_columns(&columns)?.discretize_declared()?;
    let data = DiscreteData::new(&discrete)?;
    let learned = learn_structure(&data, &cfg.structure, substream(cfg.seed, u64::MAX).random())?;
    let weights = model_weights(&learned.networks, cfg.weighting);
    let records = learned
        .networks
        .iter()
        .zip(&weights)
        .enumerate()
        .map(|(i, (net, &weight))| NetworkRecord {
            rank: i + 1,
            score: net.score,
            weight,
            dag: net.dag.clone(),
        })
        .collect();
    let estimates = cfg
        .comparisons
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let seed: u64 = substream(cfg.seed, u64::MAX - 1 - ci as u64).random();
            let avg = averaged_posterior_ace(
                &data,
                &learned.networks,
                &treatment,
                (&c.treated, &c.control),
                &outcome,
                cfg.posterior_draws,
                seed,
                cfg.structure.ess,
                cfg.weighting,
            )?;
            Ok(AceEstimate {
                comparison: c.clone(),
                method: Method::Cbn,
                point: avg.point,
                lower: avg.lower,
                upper: avg.upper,
                n_used: data.n_rows(),
                discard_fraction: None,
                warnings: Vec::new(),
            })
        })
        .collect();
    Ok((estimates, records, learned.warnings))
}

/// Output of [`cmd_learn_structure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub pc: PdagRecord,
    pub tests_run: usize,
    pub networks: Vec<ScoredNetwork>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Learns the `k` best networks over every schema variable and writes
/// `structure.json` plus `dag_<rank>.dot` into `out`.
pub fn cmd_learn_structure(data: &Path, schema: &Path, k: usize, seed: u64, out: &Path) -> Result<StructureReport> {
    let schema = Schema::from_json_file(schema)?;
    let load = load_csv_from(read_bytes(data)?.as_slice(), &schema)?;
    let discrete = DiscreteData::new(&load.dataset.discretize_declared()?)?;
    let cfg = StructureConfig {
        k,
        ..StructureConfig::default()
    };
    let learned = learn_structure(&discrete, &cfg, seed)?;
    let report = StructureReport {
        pc: learned.pc.pdag.to_record(),
        tests_run: learned.pc.tests_run,
        networks: learned.networks,
        warnings: learned.warnings,
    };
    create_dir(out)?;
    write_file(&out.join("structure.json"), to_json(&report))?;
    for (i, net) in report.networks.iter().enumerate() {
        write_file(&out.join(format!("dag_{}.dot", i + 1)), net.dag.to_dot())?;
    }
    Ok(report)
}
