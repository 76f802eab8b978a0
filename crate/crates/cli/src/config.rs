//! Run configuration: a JSON document layered over defaults, then patched
//! with dotted `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use autossl::cluster::KMeansConfig;
use autossl::ds::DsConfig;
use autossl::es::EsConfig;
use autossl::eval::ProbeConfig;
use autossl::graph::{EDGES_FILE, FEATURES_FILE};
use autossl::graph::{load_graph, sbm_generate, Graph, SbmSpec};
use autossl::tasks::{TaskKind, TaskSettings};
use autossl::train::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Es,
    Ds,
}

/// Where the graph comes from. Exactly one of the two must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSource {
    pub path: Option<PathBuf>,
    pub sbm: Option<SbmSpec>,
    /// Generator seed for `sbm`; the run seed when absent.
    pub sbm_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsOptions {
    pub population: usize,
    pub rounds: usize,
    pub sigma0: f64,
    pub initial_mean: f64,
    pub workers: usize,
}

impl Default for EsOptions {
    fn default() -> Self {
        let d = EsConfig::default();
        Self {
            population: d.population,
            rounds: d.rounds,
            sigma0: d.sigma0,
            initial_mean: d.initial_mean,
            workers: d.workers,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsOptions {
    pub outer_lr: f64,
    pub initial_weight: f64,
    pub two_sigma_sq: f64,
    pub centroid_refresh: usize,
}

impl Default for DsOptions {
    fn default() -> Self {
        let d = DsConfig::default();
        Self {
            outer_lr: d.outer_lr,
            initial_weight: d.initial_weight,
            two_sigma_sq: d.two_sigma_sq,
            centroid_refresh: d.centroid_refresh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Also compute NMI and probe accuracy for trajectory rows that carry a
    /// pseudo-homophily value.
    pub per_row: bool,
    /// Iterations between pseudo-homophily measurements in `ds` and
    /// `single` runs.
    pub interval: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub probe: ProbeConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            per_row: false,
            interval: 20,
            train_frac: 0.1,
            val_frac: 0.1,
            probe: ProbeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub graph: GraphSource,
    pub tasks: Vec<String>,
    pub task_settings: TaskSettings,
    pub train: TrainConfig,
    pub algo: Algo,
    pub es: EsOptions,
    pub ds: DsOptions,
    /// k for pseudo-homophily.
    pub clusters: usize,
    pub kmeans: KMeansConfig,
    pub eval: EvalOptions,
    /// Write wall-clock columns; disable for byte-identical reruns.
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            graph: GraphSource::default(),
            tasks: TaskKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            task_settings: TaskSettings::default(),
            train: TrainConfig::default(),
            algo: Algo::Es,
            es: EsOptions::default(),
            ds: DsOptions::default(),
            clusters: 5,
            kmeans: KMeansConfig::default(),
            eval: EvalOptions::default(),
            timings: true,
        }
    }
}

impl RunConfig {
    /// Defaults, then `file`, then each `key=value` in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let defaults = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        let mut doc = defaults.clone();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
            let user: Value = serde_json::from_str(&text).map_err(|e| {
                ConfigError(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
            })?;
            merge(&mut doc, user);
        }
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        check_known_keys(&defaults, &doc, "")?;
        let config: RunConfig = serde_json::from_value(doc).map_err(|e| ConfigError(format!("config: {e}")))?;
        Ok(config)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| ConfigError("a seed is required (--seed or \"seed\" in the config)".into()).into())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| ConfigError("an output directory is required (--out or \"out\")".into()).into())
    }

    pub fn task_kinds(&self) -> Result<Vec<TaskKind>> {
        if self.tasks.is_empty() {
            return Err(ConfigError("tasks: at least one task is required".into()).into());
        }
        self.tasks
            .iter()
            .map(|t| t.parse::<TaskKind>().map_err(|e| ConfigError(format!("tasks: {e}")).into()))
            .collect()
    }

    /// Checks that referenced paths exist and the graph source is unambiguous.
    pub fn validate_graph(&self) -> Result<()> {
        match (&self.graph.path, &self.graph.sbm) {
            (Some(_), Some(_)) => Err(ConfigError("graph: set either path or sbm, not both".into()).into()),
            (None, None) => Err(ConfigError("graph: set graph.path (or --graph) or graph.sbm".into()).into()),
            (Some(dir), None) => {
                for file in [EDGES_FILE, FEATURES_FILE] {
                    if !dir.join(file).is_file() {
                        return Err(ConfigError(format!("graph.path: {} not found", dir.join(file).display())).into());
                    }
                }
                Ok(())
            }
            (None, Some(_)) => Ok(()),
        }
    }

    pub fn load_graph(&self) -> Result<Graph> {
        self.validate_graph()?;
        match (&self.graph.path, &self.graph.sbm) {
            (Some(dir), _) => load_graph(dir).with_context(|| format!("loading graph from {}", dir.display())),
            (None, Some(spec)) => {
                let seed = match self.graph.sbm_seed {
                    Some(s) => s,
                    None => self.seed()?,
                };
                Ok(sbm_generate(spec, seed)?)
            }
            (None, None) => unreachable!("validated above"),
        }
    }

    pub fn es_config(&self) -> EsConfig {
        EsConfig {
            population: self.es.population,
            rounds: self.es.rounds,
            sigma0: self.es.sigma0,
            initial_mean: self.es.initial_mean,
            clusters: self.clusters,
            train: self.train,
            kmeans: self.kmeans,
            workers: self.es.workers,
        }
    }

    pub fn ds_config(&self) -> DsConfig {
        DsConfig {
            train: self.train,
            outer_lr: self.ds.outer_lr,
            initial_weight: self.ds.initial_weight,
            clusters: self.clusters,
            two_sigma_sq: self.ds.two_sigma_sq,
            eval_interval: self.eval.interval,
            centroid_refresh: self.ds.centroid_refresh,
            kmeans: self.kmeans,
        }
    }
}

/// Rejects keys the defaults do not have. Subtrees whose default is `null`
/// are left to the deserializer.
fn check_known_keys(defaults: &Value, user: &Value, prefix: &str) -> Result<()> {
    let (Value::Object(known), Value::Object(given)) = (defaults, user) else {
        return Ok(());
    };
    for (key, value) in given {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match known.get(key) {
            None => return Err(ConfigError(format!("unknown config field '{path}'")).into()),
            Some(d) => check_known_keys(d, value, &path)?,
        }
    }
    Ok(())
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is parsed as JSON and falls back to a string.
fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("--set '{item}': expected key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError(format!("--set '{item}': malformed key")).into());
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let map = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Map::new());
                node.as_object_mut().expect("just set")
            }
            _ => {
                return Err(ConfigError(format!("--set {key}: '{}' is not an object", parts[..depth].join("."))).into())
            }
        };
        if depth + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        if !map.contains_key(*part) {
            return Err(ConfigError(format!("--set {key}: unknown field '{}'", parts[..=depth].join("."))).into());
        }
        node = map.get_mut(*part).expect("checked");
    }
    unreachable!("the loop returns at the last key part")
}
