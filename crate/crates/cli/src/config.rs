//! Experiment configuration: a JSON document, flag overrides applied to it
//! by key path, then one typed parse that reports the offending key.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use qdyn1d_core::cfrac::{Omega, DEFAULT_DEPTH};
use qdyn1d_core::dynamics::BoundKind;
use qdyn1d_core::perturb::PerturbationSpec;
use qdyn1d_core::potentials::Condition;
use qdyn1d_core::{NormKind, PotentialSpec};

/// A configuration problem, located by its key path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TransferScan,
    Tracemap,
    Dynamics,
    Perturb,
    Sturmian,
    StructureCheck,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::TransferScan => "transfer-scan",
            ExperimentKind::Tracemap => "tracemap",
            ExperimentKind::Dynamics => "dynamics",
            ExperimentKind::Perturb => "perturb",
            ExperimentKind::Sturmian => "sturmian",
            ExperimentKind::StructureCheck => "structure-check",
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("qdyn1d-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// Top-level document shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig<P> {
    /// Must match the subcommand when present.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for parallel scans; defaults to the available cores.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
    pub params: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Geometric,
}

/// Either explicit values or `count` points from `lo` to `hi` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn points(&self, path: &str) -> Result<Vec<f64>, ConfigError> {
        let out = match self {
            GridSpec::Values(v) => v.clone(),
            GridSpec::Range(r) => {
                if r.count == 0 || !(r.lo <= r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
                    return Err(ConfigError::new(path, "range needs finite lo ≤ hi and count ≥ 1"));
                }
                if r.count == 1 {
                    return Ok(vec![r.lo]);
                }
                let step = |i: usize| i as f64 / (r.count - 1) as f64;
                match r.spacing {
                    Spacing::Linear => (0..r.count).map(|i| r.lo + (r.hi - r.lo) * step(i)).collect(),
                    Spacing::Geometric => {
                        if !(r.lo > 0.0) {
                            return Err(ConfigError::new(path, "geometric spacing needs lo > 0"));
                        }
                        (0..r.count).map(|i| r.lo * (r.hi / r.lo).powf(step(i))).collect()
                    }
                }
            }
        };
        if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
            return Err(ConfigError::new(path, "grid must contain finite values"));
        }
        Ok(out)
    }
}

fn default_n_max() -> u64 {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferScanParams {
    pub potential: PotentialSpec,
    pub energies: GridSpec,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    #[serde(default)]
    pub norm: NormKind,
    /// Also report the special energies read off from the block structure.
    #[serde(default)]
    pub special: bool,
}

fn one() -> f64 {
    1.0
}
fn default_level() -> usize {
    3
}
fn default_tol() -> f64 {
    1e-14
}
fn default_cascade() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitParams {
    pub energies: GridSpec,
    pub m_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracemapParams {
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub r: f64,
    /// Level of the gap edges.
    #[serde(default = "default_level")]
    pub m: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Levels after m reported at each edge.
    #[serde(default = "default_cascade")]
    pub cascade: usize,
    /// Growth check at every edge up to this many sites.
    #[serde(default)]
    pub norm_check_n_max: Option<u64>,
    #[serde(default)]
    pub orbit: Option<OrbitParams>,
}

fn default_ps() -> Vec<f64> {
    vec![2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessParams {
    pub energy: f64,
    pub alpha: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsParams {
    pub potential: PotentialSpec,
    /// L: sites 1..=L on the half-line, −L..=L on the whole line.
    pub sites: usize,
    pub times: GridSpec,
    #[serde(default = "default_ps")]
    pub ps: Vec<f64>,
    /// α entering N(T) = T^{1/(1+α)} and the predicted bound.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub bound: Option<BoundKind>,
    #[serde(default)]
    pub harness: Option<HarnessParams>,
    /// Also write a(n, T) for every site and T.
    #[serde(default)]
    pub amplitudes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbParams {
    pub potential: PotentialSpec,
    pub perturbation: PerturbationSpec,
    pub energy: f64,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    /// Write the per-site Prüfer series.
    #[serde(default = "yes")]
    pub series: bool,
}

fn yes() -> bool {
    true
}

fn golden() -> Omega {
    Omega::GoldenMean
}
fn default_depth() -> usize {
    DEFAULT_DEPTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SturmianParams {
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "golden")]
    pub omega: Omega,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// The constant D in α = D·d(ω)·log C_λ.
    #[serde(default = "one")]
    pub d_constant: f64,
    /// Sites of V written to potential.csv; 0 skips the file.
    #[serde(default)]
    pub word_length: usize,
}

fn default_conditions() -> Vec<Condition> {
    vec![Condition::S1, Condition::S2, Condition::S3, Condition::S4(3), Condition::S4(5)]
}
fn default_length() -> usize {
    1 << 14
}
fn default_from() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureParams {
    pub potential: PotentialSpec,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    #[serde(default = "default_length")]
    pub length: usize,
    /// Conditions are checked from this 1-based site on.
    #[serde(default = "default_from")]
    pub from_index: usize,
}

/// Reads a config file, or starts from `{"params": {}}` without one.
pub fn load_document(path: Option<&Path>) -> Result<Value, ConfigError> {
    let Some(path) = path else {
        return Ok(serde_json::json!({ "params": {} }));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| ConfigError::new("", format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(ConfigError::new("", "config must be a JSON object"));
    }
    Ok(value)
}

/// Sets `value` at a dotted key path, creating objects along the way.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(ConfigError::new(path, "empty key in path"));
        }
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ConfigError::new(keys[..i].join("."), "is not an object, cannot set a key inside it"))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// `key.path=value` with the value read as JSON, or as a string otherwise.
pub fn parse_assignment(s: &str) -> Result<(String, Value), ConfigError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::new(s, "expected key.path=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

/// Typed parse of the whole document; errors name the offending key.
pub fn parse<P: DeserializeOwned>(doc: Value, kind: ExperimentKind) -> Result<ExperimentConfig<P>, ConfigError> {
    let config: ExperimentConfig<P> = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    if let Some(declared) = config.experiment {
        if declared != kind {
            return Err(ConfigError::new(
                "experiment",
                format!("config is for `{}` but `{}` was run", declared.as_str(), kind.as_str()),
            ));
        }
    }
    if config.threads == Some(0) {
        return Err(ConfigError::new("threads", "must be at least 1"));
    }
    Ok(config)
}

/// Fills `params.perturbation.pattern.seed` from the top-level seed for
/// seeded sign patterns that do not carry their own.
pub fn inherit_seed(doc: &mut Value) {
    let seed = doc.get("seed").cloned().unwrap_or(Value::from(0u64));
    if let Some(pattern) = doc.pointer_mut("/params/perturbation/pattern").and_then(Value::as_object_mut) {
        if pattern.get("kind").and_then(Value::as_str) == Some("seeded_random") && !pattern.contains_key("seed") {
            pattern.insert("seed".into(), seed);
        }
    }
}
