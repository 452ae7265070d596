//! JSON configuration document and its expansion into scenarios.
//!
//! Only `task.amplitude` and `experiment.scenarios` are required; every other
//! field falls back to the defaults of the reference setup. The committed
//! `presets/paper.json` spells all of them out.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{ControllerConfig, UpdateLaw};
use crate::elbow::{JointParams, JointSpread};
use crate::experiment::{Condition, InitialCondition, PatientModel, ScenarioConfig};
use crate::narx::{NarxTopology, NetworkVariant, TrainOptions};
use crate::task::TaskSpec;

pub const PAPER_PRESET: &str = include_str!("../presets/paper.json");

/// Problem with a configuration document. `field` is a dotted path when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{field}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn default_omega() -> f64 {
    2.0 * std::f64::consts::PI / 3.0
}
fn default_duration() -> f64 {
    30.0
}
fn default_rate() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    /// Ultimate amplitude r* (rad).
    pub amplitude: f64,
    #[serde(default = "default_omega")]
    pub angular_frequency: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub initial_condition: InitialCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointSection {
    pub inertia: f64,
    pub viscosity: f64,
    pub stiffness: f64,
    /// Per-seed Gaussian perturbation; absent means fixed mean values.
    pub spread: Option<JointSpread>,
}

impl Default for JointSection {
    fn default() -> Self {
        let p = JointParams::default();
        Self {
            inertia: p.inertia,
            viscosity: p.viscosity,
            stiffness: p.stiffness,
            spread: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantTable<T> {
    pub narx1: T,
    pub narx2: T,
}

impl<T: Clone> VariantTable<T> {
    pub fn get(&self, v: NetworkVariant) -> T {
        match v {
            NetworkVariant::Narx1 => self.narx1.clone(),
            NetworkVariant::Narx2 => self.narx2.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NarxSection {
    pub exogenous_delays: Vec<usize>,
    pub feedback_delays: Vec<usize>,
    pub hidden_layers: VariantTable<Vec<usize>>,
    pub lesions: VariantTable<Vec<usize>>,
    pub pretrain_epochs: usize,
    pub per_trial_epochs: usize,
    pub series_parallel_warmup: usize,
    pub bayesian: bool,
}

impl Default for NarxSection {
    fn default() -> Self {
        let t = NarxTopology::for_variant(NetworkVariant::Narx1);
        Self {
            exogenous_delays: t.exogenous_delays,
            feedback_delays: t.feedback_delays,
            hidden_layers: VariantTable {
                narx1: NetworkVariant::Narx1.hidden_layers(),
                narx2: NetworkVariant::Narx2.hidden_layers(),
            },
            lesions: VariantTable {
                narx1: NetworkVariant::Narx1.stroke_removals(),
                narx2: NetworkVariant::Narx2.stroke_removals(),
            },
            pretrain_epochs: 100,
            per_trial_epochs: 0,
            series_parallel_warmup: 0,
            bayesian: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub alpha: f64,
    pub beta: f64,
    pub threshold: f64,
    /// First-trial amplitude; defaults to 0.2·r*.
    pub r_init: Option<f64>,
    pub clamp_to_r_star: bool,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let c = ControllerConfig::default();
        Self {
            alpha: c.alpha,
            beta: c.beta,
            threshold: c.threshold,
            r_init: None,
            clamp_to_r_star: c.clamp_to_r_star,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub variant: NetworkVariant,
    pub condition: Condition,
    pub law: UpdateLaw,
}

impl ScenarioSpec {
    pub fn resolved_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "{}_{}_{}",
                self.variant.name(),
                self.condition.name(),
                self.law.name()
            )
        })
    }
}

/// Either an explicit list or an inclusive range string such as `"0..99"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range(String),
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Range("0..99".into())
    }
}

/// Parses `"a..b"` (inclusive), `"a,b,c"` or a single integer.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| format!("`{}` is not a seed", s.trim()))
    };
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b) = (num(a)?, num(b)?);
        if b < a {
            return Err(format!("empty seed range {text}"));
        }
        return Ok((a..=b).collect());
    }
    let seeds = text.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err("no seeds".into());
    }
    Ok(seeds)
}

impl SeedSpec {
    pub fn resolve(&self) -> Result<Vec<u64>, String> {
        match self {
            SeedSpec::List(v) => Ok(v.clone()),
            SeedSpec::Range(s) => parse_seed_list(s),
        }
    }
}

fn default_trials() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub patient: PatientModel,
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default)]
    pub master_seed: u64,
    pub task: TaskSection,
    #[serde(default)]
    pub joint: JointSection,
    #[serde(default)]
    pub narx: NarxSection,
    #[serde(default)]
    pub controller: ControllerSection,
    pub experiment: ExperimentSection,
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::at(
            field,
            format!("must be a positive number, got {v}"),
        ))
    }
}

impl ConfigDocument {
    /// Parses and validates. Syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDocument = serde_json::from_str(text).map_err(|e| ConfigError {
            field: None,
            message: format!("invalid config: {e}"),
        })?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn paper() -> Self {
        Self::from_json(PAPER_PRESET).expect("committed preset is valid")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.task;
        if !(t.amplitude.is_finite() && t.amplitude > 0.0) {
            return Err(ConfigError::at("task.amplitude", "must be > 0"));
        }
        positive("task.angular_frequency", t.angular_frequency)?;
        positive("task.duration", t.duration)?;
        positive("task.sample_rate", t.sample_rate)?;
        if (t.duration * t.sample_rate).round() < 2.0 {
            return Err(ConfigError::at(
                "task.duration",
                "fewer than 2 samples per trial",
            ));
        }
        positive("joint.inertia", self.joint.inertia)?;
        positive("joint.stiffness", self.joint.stiffness)?;
        if !(self.joint.viscosity.is_finite() && self.joint.viscosity >= 0.0) {
            return Err(ConfigError::at("joint.viscosity", "must be >= 0"));
        }

        let n = &self.narx;
        if n.feedback_delays.contains(&0) {
            return Err(ConfigError::at(
                "narx.feedback_delays",
                "delays must be >= 1",
            ));
        }
        for (name, v) in [
            ("narx1", &n.hidden_layers.narx1),
            ("narx2", &n.hidden_layers.narx2),
        ] {
            if v.is_empty() || v.contains(&0) {
                return Err(ConfigError::at(
                    &format!("narx.hidden_layers.{name}"),
                    "need at least one layer, all widths >= 1",
                ));
            }
        }
        for (name, lesion, widths) in [
            ("narx1", &n.lesions.narx1, &n.hidden_layers.narx1),
            ("narx2", &n.lesions.narx2, &n.hidden_layers.narx2),
        ] {
            if lesion.len() != widths.len() || lesion.iter().zip(widths).any(|(k, w)| k > w) {
                return Err(ConfigError::at(
                    &format!("narx.lesions.{name}"),
                    "need one removal count per hidden layer, each at most the layer width",
                ));
            }
        }
        if n.pretrain_epochs < 1 {
            return Err(ConfigError::at("narx.pretrain_epochs", "must be >= 1"));
        }

        let c = &self.controller;
        if !(c.alpha > 0.0 && c.alpha <= 1.0) {
            return Err(ConfigError::at("controller.alpha", "must be in (0, 1]"));
        }
        positive("controller.beta", c.beta)?;
        positive("controller.threshold", c.threshold)?;
        if let Some(r) = c.r_init {
            if !(r > 0.0 && r <= t.amplitude) {
                return Err(ConfigError::at(
                    "controller.r_init",
                    "must be in (0, task.amplitude]",
                ));
            }
        }

        let e = &self.experiment;
        if e.trials < 1 {
            return Err(ConfigError::at("experiment.trials", "must be >= 1"));
        }
        let seeds = e
            .seeds
            .resolve()
            .map_err(|m| ConfigError::at("experiment.seeds", m))?;
        if seeds.is_empty() {
            return Err(ConfigError::at("experiment.seeds", "no seeds"));
        }
        if e.scenarios.is_empty() {
            return Err(ConfigError::at(
                "experiment.scenarios",
                "at least one scenario is required",
            ));
        }
        let mut names: Vec<String> = e
            .scenarios
            .iter()
            .map(ScenarioSpec::resolved_name)
            .collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::at(
                "experiment.scenarios",
                "scenario names must be unique",
            ));
        }
        if let PatientModel::ConstantError(v) = e.patient {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::at(
                    "experiment.patient",
                    "constant error must be >= 0",
                ));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.experiment.seeds.resolve().unwrap_or_default()
    }

    pub fn controller_config(&self) -> ControllerConfig {
        let r_star = self.task.amplitude;
        ControllerConfig {
            alpha: self.controller.alpha,
            beta: self.controller.beta,
            r_star,
            threshold: self.controller.threshold,
            r_init: self.controller.r_init.unwrap_or(0.2 * r_star),
            clamp_to_r_star: self.controller.clamp_to_r_star,
        }
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec {
            amplitude: self.task.amplitude,
            angular_frequency: self.task.angular_frequency,
            duration: self.task.duration,
            sample_rate: self.task.sample_rate,
        }
    }

    pub fn joint_params(&self) -> JointParams {
        JointParams {
            inertia: self.joint.inertia,
            viscosity: self.joint.viscosity,
            stiffness: self.joint.stiffness,
        }
    }

    pub fn topology(&self, variant: NetworkVariant) -> NarxTopology {
        NarxTopology {
            exogenous_delays: self.narx.exogenous_delays.clone(),
            feedback_delays: self.narx.feedback_delays.clone(),
            hidden_layers: self.narx.hidden_layers.get(variant),
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.narx.pretrain_epochs,
            bayesian: self.narx.bayesian,
            series_parallel_warmup: self.narx.series_parallel_warmup,
            ..TrainOptions::default()
        }
    }

    pub fn scenario(&self, spec: &ScenarioSpec) -> ScenarioConfig {
        ScenarioConfig {
            name: spec.resolved_name(),
            variant: spec.variant,
            condition: spec.condition,
            law: spec.law,
            controller: self.controller_config(),
            task: self.task_spec(),
            initial_condition: self.task.initial_condition,
            joint: self.joint_params(),
            joint_spread: self.joint.spread,
            topology: self.topology(spec.variant),
            lesion_removals: self.narx.lesions.get(spec.variant),
            train: self.train_options(),
            per_trial_epochs: self.narx.per_trial_epochs,
            trials: self.experiment.trials,
            seeds: self.seeds(),
            master_seed: self.master_seed,
            patient: self.experiment.patient,
        }
    }

    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        self.experiment
            .scenarios
            .iter()
            .map(|s| self.scenario(s))
            .collect()
    }

    /// SHA-256 of the canonical form: defaults filled in, object keys sorted.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
