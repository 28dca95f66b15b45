//! Coarse time-steppers: maps `x_{i+1} = G_T(x_i, p_{i+1})` on coverages.
//!
//! [`KmcStepper`] estimates the map from an ensemble of SSA replicas with an
//! adaptive ensemble size; [`LegacyStepper`] evaluates it with the mean-field
//! ODEs. Both implement [`CoarseStepper`] and are interchangeable everywhere.

mod ensemble;
mod rollout;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::meanfield::{integrate_to, CoarseState, Model, OdeOptions};
use crate::registry::Registry;

pub use ensemble::{EnsembleConfig, KmcStepper};
pub use rollout::{rollout, Rollout};

/// Outcome of one coarse step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub mean: CoarseState,
    /// Per-component standard error of the mean over `|mean|` (plain standard error where the mean is ~0).
    pub d: Vec<f64>,
    pub m_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<CoarseState>>,
}

impl StepResult {
    pub fn max_d(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }
}

pub trait CoarseStepper: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// The model at nominal parameters; steps override only the control.
    fn model(&self) -> &Model;

    /// Evolves `x` for `duration` with the control held at `control`.
    /// Stochastic steppers draw all randomness from `seed`.
    fn step(&self, x: &CoarseState, control: f64, duration: f64, seed: u64) -> Result<StepResult>;

    fn is_deterministic(&self) -> bool;
}

/// Mean-field ODE stepper.
#[derive(Debug, Clone)]
pub struct LegacyStepper {
    model: Model,
    opts: OdeOptions,
}

impl LegacyStepper {
    pub fn new(model: Model, opts: OdeOptions) -> Result<Self> {
        model.validate()?;
        Ok(Self { model, opts })
    }
}

impl CoarseStepper for LegacyStepper {
    fn name(&self) -> &'static str {
        "legacy"
    }

    fn model(&self) -> &Model {
        &self.model
    }

    fn step(&self, x: &CoarseState, control: f64, duration: f64, _seed: u64) -> Result<StepResult> {
        let model = self.model.with_control(control);
        let mean = integrate_to(&model, x, duration, &self.opts)?;
        Ok(StepResult {
            mean,
            d: vec![0.0; x.dim()],
            m_used: 1,
            samples: None,
        })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Everything a stepper factory may need.
#[derive(Debug, Clone)]
pub struct StepperContext {
    pub model: Model,
    pub ode: OdeOptions,
    pub ensemble: EnsembleConfig,
}

/// Registry holding `legacy` and `kmc`.
pub fn registry() -> Registry<dyn CoarseStepper, StepperContext> {
    let mut r: Registry<dyn CoarseStepper, StepperContext> = Registry::new("stepper");
    r.register("legacy", |c: &StepperContext| {
        Ok(Box::new(LegacyStepper::new(c.model, c.ode)?) as Box<dyn CoarseStepper>)
    });
    r.register("kmc", |c: &StepperContext| {
        Ok(Box::new(KmcStepper::new(c.model, c.ensemble.clone())?) as Box<dyn CoarseStepper>)
    });
    r
}
