//! Derivative-free minimizers for noisy objectives.
//!
//! All searches share the [`Optimizer`] interface: a [`SearchSpec`] (start
//! point, search directions, a decreasing ladder of scales and an evaluation
//! budget) and a mutable [`Objective`]. They return a [`SearchTrace`] with the
//! incumbent and one record per iteration.
//!
//! Budget: the start point is always evaluated; `max_evals` then caps the total
//! number of objective calls, so `eval_count ≤ max(max_evals, 1)`.

mod hooke_jeeves;
mod implicit_filtering;
mod multigrid;
mod nelder_mead;
mod noise;
mod restart;
mod spline;

use serde::{Deserialize, Serialize};

pub use hooke_jeeves::HookeJeeves;
pub use implicit_filtering::{central_difference_gradient, ImplicitFiltering};
pub use multigrid::{multigrid_search, MultigridOptions, MultigridTrace, StageRecord};
pub use nelder_mead::NelderMead;
pub use noise::{noise_floor, NoiseFloor};
pub use restart::{restart_until_stable, Agreement, Restarting};
pub use spline::{refine_timestep, NaturalCubicSpline};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Scalar function of a decision vector; may be stochastic.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64>;
}

/// Adapts a closure to [`Objective`].
pub struct FnObjective<F>(pub F);

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        Ok((self.0)(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub x0: Vec<f64>,
    /// Search directions; `None` means the unit coordinate basis.
    #[serde(default)]
    pub directions: Option<Vec<Vec<f64>>>,
    pub scales: Vec<f64>,
    pub max_evals: usize,
}

impl SearchSpec {
    pub fn new(x0: Vec<f64>, scales: Vec<f64>, max_evals: usize) -> Self {
        Self {
            x0,
            directions: None,
            scales,
            max_evals,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.x0.is_empty() {
            return bad("empty decision vector".into());
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad(format!("scales must be positive and finite: {:?}", self.scales));
        }
        if self.scales.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("scales must be strictly decreasing: {:?}", self.scales));
        }
        if let Some(dirs) = &self.directions {
            let n = self.x0.len();
            if dirs.iter().any(|d| d.len() != n) {
                return bad(format!("every direction must have length {n}"));
            }
            if rank(dirs) < n {
                return bad("search directions do not span the decision space".into());
            }
        }
        Ok(())
    }

    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.directions.clone().unwrap_or_else(|| {
            let n = self.x0.len();
            (0..n)
                .map(|j| (0..n).map(|k| if j == k { 1.0 } else { 0.0 }).collect())
                .collect()
        })
    }

    pub fn smallest_scale(&self) -> f64 {
        *self.scales.last().expect("validated")
    }
}

/// Numerical rank by Gram-Schmidt.
fn rank(vectors: &[Vec<f64>]) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for b in &basis {
            let dot: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
            w.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
        }
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            basis.push(w.into_iter().map(|a| a / norm).collect());
        }
    }
    basis.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Restart pass, from 1.
    pub pass: usize,
    pub iteration: usize,
    pub scale: f64,
    pub best_f: f64,
    pub eval_count: usize,
    pub accepted_moves: usize,
    pub pattern_moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub initial_f: f64,
    pub eval_count: usize,
    pub iterations: Vec<IterationRecord>,
    pub budget_exhausted: bool,
    pub passes: usize,
    pub restart_cap_hit: bool,
}

impl SearchTrace {
    /// One JSON object per iteration record.
    pub fn to_json_lines(&self) -> String {
        self.iterations
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

pub trait Optimizer: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    fn minimize(&self, spec: &SearchSpec, f: &mut dyn Objective) -> Result<SearchTrace>;
}

/// Budgeted, counting wrapper that tracks the best point seen.
pub(crate) struct Evaluator<'a> {
    f: &'a mut dyn Objective,
    max_evals: usize,
    count: usize,
    best_x: Vec<f64>,
    best_f: f64,
    initial_f: f64,
    exhausted: bool,
    records: Vec<IterationRecord>,
}

impl<'a> Evaluator<'a> {
    /// Evaluates the start point unconditionally.
    pub(crate) fn start(f: &'a mut dyn Objective, x0: &[f64], max_evals: usize) -> Result<(Self, f64)> {
        let f0 = f.evaluate(x0)?;
        let ev = Self {
            f,
            max_evals,
            count: 1,
            best_x: x0.to_vec(),
            best_f: f0,
            initial_f: f0,
            exhausted: false,
            records: Vec::new(),
        };
        Ok((ev, f0))
    }

    /// `None` once the budget is spent.
    pub(crate) fn eval(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.count >= self.max_evals {
            self.exhausted = true;
            return Ok(None);
        }
        let v = self.f.evaluate(x)?;
        self.count += 1;
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        Ok(Some(v))
    }

    /// True (and flagged) once no further evaluation is allowed.
    pub(crate) fn budget_spent(&mut self) -> bool {
        self.exhausted |= self.count >= self.max_evals;
        self.exhausted
    }

    pub(crate) fn best_f(&self) -> f64 {
        self.best_f
    }

    pub(crate) fn record(&mut self, iteration: usize, scale: f64, accepted_moves: usize, pattern_moves: usize) {
        self.records.push(IterationRecord {
            pass: 1,
            iteration,
            scale,
            best_f: self.best_f,
            eval_count: self.count,
            accepted_moves,
            pattern_moves,
        });
    }

    pub(crate) fn finish(self) -> SearchTrace {
        SearchTrace {
            best_x: self.best_x,
            best_f: self.best_f,
            initial_f: self.initial_f,
            eval_count: self.count,
            iterations: self.records,
            budget_exhausted: self.exhausted,
            passes: 1,
            restart_cap_hit: false,
        }
    }
}

pub(crate) fn axpy(x: &[f64], a: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(xi, vi)| xi + a * vi).collect()
}

/// Tunables shared by the registered optimizers.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    /// Implicit filtering: line-search halvings before falling back to the best stencil point.
    pub max_backtracks: usize,
    /// Implicit filtering: iteration cap at each scale.
    pub max_iterations_per_scale: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_backtracks: 3,
            max_iterations_per_scale: 100,
        }
    }
}

/// Registry holding `hooke-jeeves`, `implicit-filtering` and `nelder-mead`.
pub fn registry() -> Registry<dyn Optimizer, OptimizerOptions> {
    let mut r: Registry<dyn Optimizer, OptimizerOptions> = Registry::new("optimizer");
    r.register("hooke-jeeves", |_: &OptimizerOptions| Ok(Box::new(HookeJeeves) as Box<dyn Optimizer>));
    r.register("implicit-filtering", |o: &OptimizerOptions| {
        Ok(Box::new(ImplicitFiltering {
            max_backtracks: o.max_backtracks,
            max_iterations_per_scale: o.max_iterations_per_scale,
        }) as Box<dyn Optimizer>)
    });
    r.register("nelder-mead", |_: &OptimizerOptions| Ok(Box::new(NelderMead) as Box<dyn Optimizer>));
    r
}
