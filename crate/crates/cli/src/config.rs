//! Run configuration: a JSON document validated against [`RunConfig`].
//!
//! Values are resolved in three layers: the file (or a shipped preset), then
//! environment variables named `COARSE_SWITCH__<PATH>` where `<PATH>` joins
//! keys with `__` (matched case-insensitively, e.g.
//! `COARSE_SWITCH__STEPPER__ENSEMBLE__M_REPLICAS=400`), then command-line
//! flags. Environment values are parsed as JSON when possible and taken as
//! strings otherwise.

use std::path::{Path, PathBuf};

use coarse_switch::meanfield::{CoarseState, Model, OdeOptions};
use coarse_switch::objective::{ChargeTime, DecayWeight, InitialProfile, Policy, SeedMode, SwitchingProblem};
use coarse_switch::optim::{
    refine_timestep, Agreement, MultigridOptions, Optimizer, OptimizerOptions, Restarting, SearchSpec,
};
use coarse_switch::stepper::{CoarseStepper, EnsembleConfig, StepperContext};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const ENV_PREFIX: &str = "COARSE_SWITCH__";

/// Shipped presets, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("no", include_str!("../presets/no.json")),
    ("no-kmc", include_str!("../presets/no-kmc.json")),
    ("co", include_str!("../presets/co.json")),
    ("co-kmc", include_str!("../presets/co-kmc.json")),
    ("co-multigrid", include_str!("../presets/co-multigrid.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free text, ignored.
    #[serde(rename = "_comment", default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    /// Mechanism and rate constants; the manipulated parameter's value is the nominal `p_ss`.
    pub model: Model,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub stepper: StepperConfig,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Start state; defaults to the stable state with the smallest first coverage.
    pub x_start: Option<Vec<f64>>,
    /// Target state; defaults to the stable state with the largest first coverage.
    pub x_target: Option<Vec<f64>>,
    pub epsilon: f64,
    pub w_scale: f64,
    pub param_box: [f64; 2],
    pub decay: DecayWeight,
    pub charge_time: ChargeTime,
}

impl ProblemConfig {
    /// Field checks that do not need the steady states.
    pub fn validate(&self, dim: usize) -> CliResult<()> {
        for (name, x) in [("x_start", &self.x_start), ("x_target", &self.x_target)] {
            if let Some(x) = x {
                if x.len() != dim {
                    return Err(CliError::Config(format!(
                        "problem.{name} has {} coverages, the model needs {dim}",
                        x.len()
                    )));
                }
                CoarseState::from_slice(x)?;
            }
        }
        if !(self.epsilon > 0.0) || !(self.w_scale >= 0.0) {
            return Err(CliError::Config(format!(
                "problem needs epsilon > 0 and w_scale >= 0 (got {}, {})",
                self.epsilon, self.w_scale
            )));
        }
        let [lo, hi] = self.param_box;
        if !(lo <= hi) {
            return Err(CliError::Config(format!("problem.param_box [{lo}, {hi}] is empty")));
        }
        Ok(())
    }
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            x_start: None,
            x_target: None,
            epsilon: SwitchingProblem::DEFAULT_EPSILON,
            w_scale: SwitchingProblem::DEFAULT_W_SCALE,
            param_box: SwitchingProblem::DEFAULT_BOX,
            decay: DecayWeight::default(),
            charge_time: ChargeTime::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    /// `legacy` (mean-field ODE) or `kmc` (replica ensemble).
    pub kind: String,
    pub ode: OdeOptions,
    pub ensemble: EnsembleConfig,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            kind: "legacy".into(),
            ode: OdeOptions::default(),
            ensemble: EnsembleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(rename = "T")]
    pub interval: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
    /// Profile used when no warm start is given.
    #[serde(default)]
    pub initial: InitialProfile,
    /// Policy JSON to start from; resampled onto `T` when its grid differs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// `hooke-jeeves`, `implicit-filtering` or `nelder-mead`.
    pub algorithm: String,
    /// Strictly decreasing stencil scales.
    pub scales: Vec<f64>,
    /// Objective evaluations allowed (per multigrid stage).
    pub max_evals: usize,
    pub restart: Option<RestartConfig>,
    pub seed_mode: SeedMode,
    pub multigrid: Option<MultigridOptions>,
    pub options: OptimizerOptions,
    /// Repeats for the pre-search noise-floor check; skipped for deterministic steppers.
    pub noise_check_repeats: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: "hooke-jeeves".into(),
            scales: vec![1.0, 0.5, 0.25, 0.125],
            max_evals: 100_000,
            restart: Some(RestartConfig::default()),
            seed_mode: SeedMode::default(),
            multigrid: None,
            options: OptimizerOptions::default(),
            noise_check_repeats: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RestartConfig {
    pub agreement: Agreement,
    pub cap: usize,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self {
            agreement: Agreement::default(),
            cap: 5,
        }
    }
}

/// JSON Schema of [`RunConfig`].
pub fn schema() -> Value {
    serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serializes")
}

pub fn preset(name: &str) -> CliResult<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown preset `{name}` (available: {})", names.join(", ")))
        })
}

/// Environment variables carrying config overrides, sorted by name.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut vars: Vec<(String, String)> = std::env::vars()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|path| (path.to_owned(), v)))
        .collect();
    vars.sort();
    vars
}

fn set_path(root: &mut Value, path: &str, raw: &str) -> CliResult<()> {
    let keys: Vec<&str> = path.split("__").collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("malformed override path `{path}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                let existing = map.keys().find(|k| k.eq_ignore_ascii_case(key)).cloned();
                let name = existing.unwrap_or_else(|| key.to_ascii_lowercase());
                if last {
                    map.insert(name, value);
                    return Ok(());
                }
                map.entry(name).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| CliError::Config(format!("override `{path}`: `{key}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("override `{path}`: index {idx} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            Value::Null => {
                *node = Value::Object(Default::default());
                let Value::Object(map) = node else { unreachable!() };
                if last {
                    map.insert(key.to_ascii_lowercase(), value);
                    return Ok(());
                }
                map.entry(key.to_ascii_lowercase())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            _ => {
                return Err(CliError::Config(format!(
                    "override `{path}`: `{key}` does not name an object field"
                )))
            }
        };
    }
    Ok(())
}

impl RunConfig {
    /// Parses `text`, applies `overrides` (config paths without the prefix) and validates.
    pub fn from_text(text: &str, source: &str, overrides: &[(String, String)]) -> CliResult<Self> {
        let parsed: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
        let config = if overrides.is_empty() {
            parsed
        } else {
            let mut value = serde_json::to_value(&parsed).expect("config serializes");
            for (path, raw) in overrides {
                set_path(&mut value, path, raw)?;
            }
            serde_json::from_value(value)
                .map_err(|e| CliError::Config(format!("{source} after environment overrides: {e}")))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::from_text(&text, &path.display().to_string(), overrides)
    }

    pub fn from_preset(name: &str, overrides: &[(String, String)]) -> CliResult<Self> {
        Self::from_text(preset(name)?, &format!("preset `{name}`"), overrides)
    }

    /// Checks every block by building the objects it describes.
    pub fn validate(&self) -> CliResult<()> {
        self.model.validate()?;
        self.problem.validate(self.model.dim())?;
        self.stepper_context().ensemble.validate()?;
        self.stepper()?;
        if !(self.policy.interval > 0.0 && self.policy.interval.is_finite()) || self.policy.intervals == 0 {
            return Err(CliError::Config(format!(
                "policy grid needs T > 0 and N >= 1 (got T = {}, N = {})",
                self.policy.interval, self.policy.intervals
            )));
        }
        self.optimizer()?;
        SearchSpec::new(vec![0.0], self.optimizer.scales.clone(), self.optimizer.max_evals).validate()?;
        if let Some(r) = &self.optimizer.restart {
            if r.cap == 0 {
                return Err(CliError::Config("optimizer.restart.cap must be at least 1".into()));
            }
        }
        if let Some(m) = &self.optimizer.multigrid {
            m.validate()?;
        }
        if let Some(n) = self.optimizer.noise_check_repeats {
            if n < 2 {
                return Err(CliError::Config("optimizer.noise_check_repeats must be at least 2".into()));
            }
        }
        Ok(())
    }

    /// The switching problem; fails unless the model is bistable or both end states are given.
    pub fn problem(&self) -> CliResult<SwitchingProblem> {
        let mut p = SwitchingProblem::bistable(self.model)?;
        if let Some(x) = &self.problem.x_start {
            p.x_start = CoarseState::from_slice(x)?;
        }
        if let Some(x) = &self.problem.x_target {
            p.x_target = CoarseState::from_slice(x)?;
        }
        p.epsilon = self.problem.epsilon;
        p.w_scale = self.problem.w_scale;
        p.param_box = self.problem.param_box;
        p.decay = self.problem.decay;
        p.charge_time = self.problem.charge_time;
        p.validate()?;
        Ok(p)
    }

    pub fn stepper_context(&self) -> StepperContext {
        StepperContext {
            model: self.model,
            ode: self.stepper.ode,
            ensemble: self.stepper.ensemble.clone(),
        }
    }

    pub fn stepper(&self) -> CliResult<Box<dyn CoarseStepper>> {
        self.stepper_named(&self.stepper.kind)
    }

    pub fn stepper_named(&self, kind: &str) -> CliResult<Box<dyn CoarseStepper>> {
        Ok(coarse_switch::stepper::registry().create(kind, &self.stepper_context())?)
    }

    /// The configured algorithm, wrapped in restarts when a restart block is present.
    pub fn optimizer(&self) -> CliResult<Box<dyn Optimizer>> {
        let inner = coarse_switch::optim::registry().create(&self.optimizer.algorithm, &self.optimizer.options)?;
        Ok(match &self.optimizer.restart {
            Some(r) => Box::new(Restarting {
                inner,
                agreement: r.agreement,
                cap: r.cap,
            }),
            None => inner,
        })
    }

    pub fn search_template(&self) -> SearchSpec {
        SearchSpec::new(vec![], self.optimizer.scales.clone(), self.optimizer.max_evals)
    }

    /// Starting policy: the warm start resampled onto the configured grid, or the initial profile.
    pub fn initial_policy(&self) -> CliResult<Policy> {
        let p_ss = self.model.control();
        let mechanism = self.model.mechanism();
        let Some(path) = &self.policy.warm_start else {
            return Ok(self
                .policy
                .initial
                .build(mechanism, self.policy.interval, self.policy.intervals, p_ss)?);
        };
        let warm = load_policy(path)?;
        if warm.mechanism != mechanism {
            return Err(CliError::Config(format!(
                "warm start {} is a {} policy, the model is {mechanism}",
                path.display(),
                warm.mechanism
            )));
        }
        let horizon = self.policy.interval * self.policy.intervals as f64;
        if (warm.horizon() - horizon).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "warm start horizon {} differs from the configured {horizon}",
                warm.horizon()
            )));
        }
        if (warm.interval - self.policy.interval).abs() <= 1e-12 {
            Ok(warm)
        } else {
            Ok(refine_timestep(&warm, self.policy.interval, self.problem.param_box)?)
        }
    }
}

pub fn load_policy(path: &Path) -> CliResult<Policy> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    Policy::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
