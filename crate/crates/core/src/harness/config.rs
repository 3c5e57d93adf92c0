use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::datasets::{CsvSplit, Generator};
use crate::error::{invalid, Error, Result};
use crate::model::{Activation, Classifier, LossSpec, Optimizer, TrainConfig};
use crate::selftrain::StepOptions;
use crate::theory::BoundConstants;

/// Kind of domain path a trial runs on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathKind {
    /// Fresh draws rotated from `start_deg` to `end_deg`.
    Rotation,
    /// Fresh draws translated from 0 to `offset`.
    Translation,
    /// Displacement interpolation between a source draw and a shifted target draw.
    Geodesic,
    /// Geodesic with interior domains pushed sideways by the given magnitude.
    Detour(f64),
    /// Sorted split of a CSV file.
    Csv,
}

impl PathKind {
    /// Stable numeric key for seed derivation.
    pub fn key(&self) -> u64 {
        match self {
            PathKind::Rotation => 1,
            PathKind::Translation => 2,
            PathKind::Geodesic => 3,
            PathKind::Detour(m) => 4 ^ m.to_bits().rotate_left(8),
            PathKind::Csv => 5,
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathKind::Rotation => f.write_str("rotation"),
            PathKind::Translation => f.write_str("translation"),
            PathKind::Geodesic => f.write_str("geodesic"),
            PathKind::Detour(m) => write!(f, "detour:{m}"),
            PathKind::Csv => f.write_str("csv"),
        }
    }
}

impl FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "rotation" => Ok(PathKind::Rotation),
            "translation" => Ok(PathKind::Translation),
            "geodesic" => Ok(PathKind::Geodesic),
            "csv" => Ok(PathKind::Csv),
            _ => {
                let m = s
                    .strip_prefix("detour:")
                    .ok_or_else(|| invalid(format!("unknown path kind `{s}`")))?;
                let v: f64 = m
                    .parse()
                    .map_err(|_| invalid(format!("bad detour magnitude `{m}`")))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(invalid("detour magnitude must be non-negative"));
                }
                Ok(PathKind::Detour(v))
            }
        }
    }
}

impl<'de> Deserialize<'de> for PathKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for PathKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    TwoMoons {
        #[serde(default = "default_noise")]
        noise_sigma: f64,
    },
    Blobs {
        dim: usize,
        separation: f64,
        sigma: f64,
    },
    Csv {
        file: PathBuf,
        sort_column: String,
        label_column: String,
        source_size: usize,
        target_size: usize,
    },
}

fn default_noise() -> f64 {
    0.1
}

impl DatasetSpec {
    pub fn generator(&self) -> Option<Generator> {
        match *self {
            DatasetSpec::TwoMoons { noise_sigma } => Some(Generator::TwoMoons { noise_sigma }),
            DatasetSpec::Blobs { dim, separation, sigma } => Some(Generator::Blobs { dim, separation, sigma }),
            DatasetSpec::Csv { .. } => None,
        }
    }

    pub fn csv_split(&self, steps: usize, n: usize) -> Option<(PathBuf, CsvSplit)> {
        match self {
            DatasetSpec::Csv {
                file,
                sort_column,
                label_column,
                source_size,
                target_size,
            } => Some((
                file.clone(),
                CsvSplit {
                    sort_column: sort_column.clone(),
                    label_column: label_column.clone(),
                    source_size: *source_size,
                    target_size: *target_size,
                    steps,
                    n,
                },
            )),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSpec {
    pub kinds: Vec<PathKind>,
    pub start_deg: f64,
    pub end_deg: f64,
    /// Total translation for translation paths and translated geodesic targets.
    pub offset: Option<Vec<f64>>,
    /// Couple each class separately when building geodesic and detour paths.
    pub class_conditional: bool,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            kinds: vec![PathKind::Rotation],
            start_deg: 0.0,
            end_deg: 120.0,
            offset: None,
            class_conditional: true,
        }
    }
}

/// Seeds of a sweep: either an explicit list or a count `0..count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedList {
    Count(u64),
    List(Vec<u64>),
}

impl SeedList {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedList::Count(c) => (0..*c).collect(),
            SeedList::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub t_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub seeds: SeedList,
    /// Size of the held-out source and target test sets.
    pub n_eval: usize,
    /// Measure wall time per trial. Off by default so output bytes are reproducible.
    pub record_timing: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            t_values: vec![2, 5, 10, 20, 40, 80],
            n_values: vec![50],
            seeds: SeedList::Count(20),
            n_eval: 1000,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Linear,
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}

fn default_activation() -> Activation {
    Activation::Relu
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Mlp {
            hidden: default_hidden(),
            activation: default_activation(),
        }
    }
}

impl ModelSpec {
    pub fn init(&self, dim: usize, seed: u64) -> Result<Classifier> {
        match self {
            ModelSpec::Linear => Classifier::init_linear(dim, seed),
            ModelSpec::Mlp { hidden, activation } => Classifier::init_mlp(dim, hidden, *activation, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportSpec {
    pub p: f64,
    /// Measure shifts on (features, label_weight * label) instead of features.
    pub joint: bool,
    pub label_weight: f64,
}

impl Default for TransportSpec {
    fn default() -> Self {
        Self {
            p: 2.0,
            joint: false,
            label_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSpec {
    pub t: usize,
    pub detours: Vec<f64>,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            t: 20,
            detours: vec![0.0, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    pub constants: BoundConstants,
    pub eps0: f64,
    pub n: f64,
    pub delta_avg: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_step: f64,
    /// Largest per-step shift; defaults to `delta_avg`.
    pub delta_max: Option<f64>,
    pub source_target_distance: f64,
    pub scale: f64,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            constants: BoundConstants::default(),
            eps0: 0.1,
            n: 100.0,
            delta_avg: 0.05,
            t_min: 1.0,
            t_max: 200.0,
            t_step: 1.0,
            delta_max: None,
            source_target_distance: 0.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub lemma_trials: usize,
    /// Cloud size for the exact transport distance.
    pub lemma_n: usize,
    /// Size of the sets the empirical errors are measured on.
    pub lemma_n_eval: usize,
    pub lemma_dim: usize,
    pub identical_trials: usize,
    pub disc_trials: usize,
    /// Seeds of the rotation runs behind the stability and growth batteries.
    pub stability_seeds: usize,
    pub stability_t: usize,
    /// Size of the per-step held-out sets of those runs.
    pub stability_n_eval: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            lemma_trials: 1000,
            lemma_n: 50,
            lemma_n_eval: 500,
            lemma_dim: 2,
            identical_trials: 100,
            disc_trials: 20,
            stability_seeds: 20,
            stability_t: 20,
            stability_n_eval: 2000,
        }
    }
}

/// Full experiment description; every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub path: PathSpec,
    pub sweep: SweepSpec,
    pub model: ModelSpec,
    pub loss: LossSpec,
    /// Training for each self-training step.
    pub train: TrainConfig,
    /// Training for the supervised source fit.
    pub source_train: TrainConfig,
    pub self_train: StepOptions,
    pub transport: TransportSpec,
    pub compare: CompareSpec,
    pub bounds: BoundsSpec,
    pub verify: VerifySpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: DatasetSpec::TwoMoons {
                noise_sigma: default_noise(),
            },
            path: PathSpec::default(),
            sweep: SweepSpec::default(),
            model: ModelSpec::default(),
            loss: LossSpec::logistic(),
            train: TrainConfig {
                optimizer: Optimizer::adam(),
                lr: 0.01,
                epochs: 10,
                batch_size: 10,
                weight_decay: 0.05,
                seed: 0,
            },
            source_train: TrainConfig {
                optimizer: Optimizer::adam(),
                lr: 0.01,
                epochs: 200,
                batch_size: 10,
                weight_decay: 0.0,
                seed: 0,
            },
            self_train: StepOptions::default(),
            transport: TransportSpec::default(),
            compare: CompareSpec::default(),
            bounds: BoundsSpec::default(),
            verify: VerifySpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config file. Keys missing from a section keep the values of
    /// [`ExperimentConfig::default`]; a table whose `kind` differs from the
    /// default replaces it wholesale.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text)?;
        let mut base = match toml::Value::try_from(ExperimentConfig::default()) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(invalid("default config does not serialize to a table")),
        };
        merge(&mut base, user);
        let cfg: ExperimentConfig = toml::Value::Table(base).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.path.kinds.is_empty() {
            return Err(invalid("path.kinds is empty"));
        }
        if self.sweep.t_values.is_empty() || self.sweep.t_values.contains(&0) {
            return Err(invalid("sweep.t_values must be a non-empty list of positive integers"));
        }
        if self.sweep.n_values.is_empty() || self.sweep.n_values.contains(&0) {
            return Err(invalid("sweep.n_values must be a non-empty list of positive integers"));
        }
        if self.sweep.seeds.seeds().is_empty() {
            return Err(invalid("sweep.seeds is empty"));
        }
        if self.sweep.n_eval == 0 {
            return Err(invalid("sweep.n_eval must be positive"));
        }
        self.train.validate()?;
        self.source_train.validate()?;
        self.bounds.constants.validate()?;
        if !(self.transport.p >= 1.0) {
            return Err(invalid("transport.p must be at least 1"));
        }
        let csv_data = matches!(self.dataset, DatasetSpec::Csv { .. });
        for k in &self.path.kinds {
            if (*k == PathKind::Csv) != csv_data {
                return Err(invalid(format!(
                    "path kind `{k}` does not match dataset `{}`",
                    match &self.dataset {
                        DatasetSpec::Csv { .. } => "csv",
                        DatasetSpec::TwoMoons { .. } => "two_moons",
                        DatasetSpec::Blobs { .. } => "blobs",
                    }
                )));
            }
            if *k == PathKind::Translation && self.path.offset.is_none() {
                return Err(invalid("translation paths need path.offset"));
            }
        }
        if !self.self_train.hard && !self.loss.accepts_soft_targets() {
            return Err(invalid("self_train.hard = false needs the squared loss"));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if b.get("kind") == o.get("kind") || o.get("kind").is_none() => {
                merge(b, o)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
