//! Experiment configuration.
//!
//! A configuration is a JSON object. Missing fields take their defaults;
//! layers are deep-merged in the order recipe preset, `--config` file,
//! `--set key=value` overrides, `--seed`.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::dictionary::ObservableSet;
use crate::dynamics::EmulatorParams;
use crate::error::{Error, Result};
use crate::evaluation::{ScenarioName, ScenarioParams};
use crate::sampling::CollectConfig;
use crate::surrogate::Variant;
use crate::types::{Control, ControlBasis, InputBounds, Interval, State, StateDomain};

/// Training input basis: a named preset or two explicit `[v, omega]` vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisChoice {
    /// Unit vectors.
    B,
    B1,
    B2,
    Custom([[f64; 2]; 2]),
}

impl BasisChoice {
    pub fn basis(&self) -> Result<ControlBasis> {
        match *self {
            BasisChoice::B => Ok(ControlBasis::unit()),
            BasisChoice::B1 => Ok(ControlBasis::b1()),
            BasisChoice::B2 => Ok(ControlBasis::b2()),
            BasisChoice::Custom([a, b]) => ControlBasis::new(Control::new(a[0], a[1]), Control::new(b[0], b[1]))
                .map_err(|e| Error::invalid(format!("basis: {e}"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BasisChoice::B => "B".into(),
            BasisChoice::B1 => "B1".into(),
            BasisChoice::B2 => "B2".into(),
            BasisChoice::Custom(_) => "custom".into(),
        }
    }
}

impl Serialize for BasisChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BasisChoice::Custom(v) => v.serialize(s),
            other => s.serialize_str(&other.label()),
        }
    }
}

impl<'de> Deserialize<'de> for BasisChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        match &v {
            Value::String(s) => match s.to_ascii_uppercase().as_str() {
                "B" => Ok(BasisChoice::B),
                "B1" => Ok(BasisChoice::B1),
                "B2" => Ok(BasisChoice::B2),
                _ => Err(D::Error::custom(format!(
                    "basis: unknown name `{s}` (expected B, B1, B2 or [[v, omega], [v, omega]])"
                ))),
            },
            Value::Array(_) => serde_json::from_value(v)
                .map(BasisChoice::Custom)
                .map_err(|e| D::Error::custom(format!("basis: expected [[v, omega], [v, omega]] ({e})"))),
            _ => Err(D::Error::custom("basis: expected a name or [[v, omega], [v, omega]]")),
        }
    }
}

/// Observable set: a preset name or explicit exponent triplets.
#[derive(Debug, Clone, PartialEq)]
pub enum DictionaryChoice {
    Preset(String),
    Custom(Vec<[u32; 3]>),
}

impl DictionaryChoice {
    pub fn observables(&self) -> Result<ObservableSet> {
        match self {
            DictionaryChoice::Preset(name) => {
                ObservableSet::preset_by_name(name).map_err(|e| Error::invalid(format!("dictionary: {e}")))
            }
            DictionaryChoice::Custom(t) => {
                ObservableSet::from_triplets(t.clone()).map_err(|e| Error::invalid(format!("dictionary: {e}")))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            DictionaryChoice::Preset(name) => name.to_ascii_uppercase(),
            DictionaryChoice::Custom(t) => format!("custom{}", t.len()),
        }
    }
}

impl Serialize for DictionaryChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DictionaryChoice::Preset(n) => s.serialize_str(n),
            DictionaryChoice::Custom(t) => t.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for DictionaryChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        match &v {
            Value::String(s) => match s.to_ascii_uppercase().as_str() {
                "O120" | "O32" | "O11" => Ok(DictionaryChoice::Preset(s.to_ascii_uppercase())),
                _ => Err(D::Error::custom(format!(
                    "dictionary: unknown preset `{s}` (expected O120, O32, O11 or a list of [a, b, c] exponents)"
                ))),
            },
            Value::Array(_) => serde_json::from_value(v)
                .map(DictionaryChoice::Custom)
                .map_err(|e| D::Error::custom(format!("dictionary: expected a list of [a, b, c] exponents ({e})"))),
            _ => Err(D::Error::custom("dictionary: expected a preset name or a list of exponents")),
        }
    }
}

/// Where training data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    IidSim,
    CollectB1,
    CollectB2,
    /// Snapshot sidecar JSON written by `generate-data`.
    Dataset(PathBuf),
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::IidSim => f.write_str("iid-sim"),
            DataSource::CollectB1 => f.write_str("collect-b1"),
            DataSource::CollectB2 => f.write_str("collect-b2"),
            DataSource::Dataset(p) => write!(f, "dataset {}", p.display()),
        }
    }
}

impl Serialize for DataSource {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DataSource::Dataset(p) => {
                let mut m = Map::new();
                m.insert("dataset".into(), Value::String(p.to_string_lossy().into_owned()));
                Value::Object(m).serialize(s)
            }
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for DataSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        let bad = || {
            D::Error::custom(format!(
                "data_source: unknown value {v} (expected iid-sim, collect-b1, collect-b2 or {{\"dataset\": path}})"
            ))
        };
        match &v {
            Value::String(s) => match s.to_ascii_lowercase().as_str() {
                "iid-sim" => Ok(DataSource::IidSim),
                "collect-b1" => Ok(DataSource::CollectB1),
                "collect-b2" => Ok(DataSource::CollectB2),
                _ => Err(bad()),
            },
            Value::Object(m) if m.len() == 1 => match m.get("dataset") {
                Some(Value::String(p)) => Ok(DataSource::Dataset(PathBuf::from(p))),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Plant used for trajectory collection and reference runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantChoice {
    Nominal,
    Emulator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subsample {
    pub m2: usize,
    pub n: usize,
}

/// Collection knobs beyond domain, interval and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectTuning {
    pub ramp_steps: usize,
    pub target_tolerance: f64,
    pub min_cruise_steps: usize,
    pub min_segment_steps: usize,
    pub approach: Control,
    pub max_targets: usize,
    /// Pose the robot starts collecting from.
    pub start: [f64; 3],
}

impl Default for CollectTuning {
    fn default() -> Self {
        let c = CollectConfig::default();
        Self {
            ramp_steps: c.ramp_steps,
            target_tolerance: c.target_tolerance,
            min_cruise_steps: c.min_cruise_steps,
            min_segment_steps: c.min_segment_steps,
            approach: c.approach,
            max_targets: c.max_targets,
            start: [0.75, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Sampling interval in seconds.
    pub delta: f64,
    pub domain: StateDomain,
    /// Orientation range of i.i.d. samples.
    pub theta_range: Interval,
    pub input_bounds: InputBounds,
    pub basis: BasisChoice,
    pub dictionary: DictionaryChoice,
    pub data_source: DataSource,
    pub plant: PlantChoice,
    /// Points per input for i.i.d. sampling.
    pub d: usize,
    /// Retained pairs for trajectory collection.
    pub steps_budget: usize,
    pub ridge: f64,
    pub variant: Variant,
    pub emulator: EmulatorParams,
    pub collect: CollectTuning,
    pub scenario: ScenarioName,
    pub scenario_params: ScenarioParams,
    /// Start pose of the test scenario; the scenario default when absent.
    pub x0: Option<[f64; 3]>,
    pub runs: usize,
    pub subsample: Option<Subsample>,
    /// Strides compared by the data-efficiency recipe.
    pub subsample_strides: Vec<usize>,
    /// Allowed `max |K0 - I|` when the data is drift-free.
    pub driftless_tolerance: f64,
    /// Report failed sanity checks without failing the command.
    pub waive_checks: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            delta: 0.02,
            domain: StateDomain::motion_plane(),
            theta_range: Interval::new(-PI, PI).expect("valid"),
            input_bounds: InputBounds::default(),
            basis: BasisChoice::B,
            dictionary: DictionaryChoice::Preset("O120".into()),
            data_source: DataSource::IidSim,
            plant: PlantChoice::Nominal,
            d: 10_000,
            steps_budget: 5000,
            ridge: 0.0,
            variant: Variant::Sur1,
            emulator: EmulatorParams::hardware_like(),
            collect: CollectTuning::default(),
            scenario: ScenarioName::Circle,
            scenario_params: ScenarioParams::default(),
            x0: None,
            runs: 15,
            subsample: None,
            subsample_strides: vec![1, 20, 50, 100],
            driftless_tolerance: 1e-6,
            waive_checks: false,
        }
    }
}

impl ExperimentConfig {
    /// Range and consistency checks; error messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: String| Err(Error::invalid(format!("{field}: {msg}")));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return fail("delta", format!("must be positive, got {}", self.delta));
        }
        if self.d == 0 {
            return fail("d", "must be at least 1".into());
        }
        if self.steps_budget == 0 {
            return fail("steps_budget", "must be at least 1".into());
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return fail("ridge", format!("must be nonnegative, got {}", self.ridge));
        }
        if self.runs == 0 {
            return fail("runs", "must be at least 1".into());
        }
        if let Some(s) = self.subsample {
            if s.m2 == 0 || s.n == 0 {
                return fail("subsample", "m2 and n must be at least 1".into());
            }
        }
        if self.subsample_strides.is_empty() || self.subsample_strides.contains(&0) {
            return fail("subsample_strides", "must be a nonempty list of positive strides".into());
        }
        if self.driftless_tolerance.is_nan() || self.driftless_tolerance < 0.0 {
            return fail("driftless_tolerance", "must be nonnegative".into());
        }
        if let Some(x) = self.x0 {
            if x.iter().any(|v| !v.is_finite()) {
                return fail("x0", "must be finite".into());
            }
        }
        self.emulator.validate().map_err(|e| Error::invalid(format!("emulator: {e}")))?;
        self.basis()?;
        self.observables()?;
        if let DataSource::Dataset(p) = &self.data_source {
            if !p.is_file() {
                return fail("data_source", format!("dataset file {} does not exist", p.display()));
            }
        }
        self.collect_config()
            .validate()
            .map_err(|e| Error::invalid(format!("collect: {e}")))?;
        Ok(())
    }

    pub fn basis(&self) -> Result<ControlBasis> {
        self.basis.basis()
    }

    pub fn observables(&self) -> Result<ObservableSet> {
        self.dictionary.observables()
    }

    pub fn start_pose(&self) -> State {
        self.x0.map(State::from_array).unwrap_or_else(|| self.scenario.default_start())
    }

    pub fn collect_config(&self) -> CollectConfig {
        CollectConfig {
            domain: self.domain,
            delta: self.delta,
            steps_budget: self.steps_budget,
            ramp_steps: self.collect.ramp_steps,
            target_tolerance: self.collect.target_tolerance,
            min_cruise_steps: self.collect.min_cruise_steps,
            min_segment_steps: self.collect.min_segment_steps,
            approach: self.collect.approach,
            max_targets: self.collect.max_targets,
        }
    }
}

/// Recursively overlays `top` onto `base`.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Applies `key.path=value`; the value is parsed as JSON, else taken as a string.
pub fn apply_override(target: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("--set expects key=value, got `{assignment}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::invalid(format!("--set has an empty key in `{assignment}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut patch = value;
    for part in key.rsplit('.') {
        let mut m = Map::new();
        m.insert(part.to_string(), patch);
        patch = Value::Object(m);
    }
    merge(target, patch);
    Ok(())
}

/// Resolves the layered configuration into a validated [`ExperimentConfig`].
pub fn resolve(preset: Value, file: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut v = serde_json::to_value(ExperimentConfig::default())?;
    merge(&mut v, preset);
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("config: cannot read {}: {e}", path.display())))?;
        let layer: Value = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
        if !layer.is_object() {
            return Err(Error::invalid(format!("config {}: expected a JSON object", path.display())));
        }
        merge(&mut v, layer);
    }
    for o in overrides {
        apply_override(&mut v, o)?;
    }
    if let Some(s) = seed {
        merge(&mut v, serde_json::json!({ "seed": s }));
    }
    let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| Error::invalid(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
