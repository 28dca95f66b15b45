//! Switching problems and their discrete-time objective.
//!
//! A policy is charged a running cost for every decision that departs from
//! the nominal parameter, weighted by `1 − a·e^{−r·t}`, plus a terminal
//! penalty `W = w_scale·[1 − exp(−Σ_c R(|x_c − x_target,c| − ε))]` with the
//! ramp `R(z) = max(z, 0)`. Policies leaving the admissible parameter box are
//! not simulated; they receive `10⁶·(1 + violation)` instead.

mod policy;

use serde::{Deserialize, Serialize};

pub use policy::{InitialProfile, Policy};

use crate::error::{Error, Result};
use crate::meanfield::{find_steady_states, CoarseState, Model, Stability};
use crate::optim::Objective;
use crate::seed;
use crate::stepper::{rollout, CoarseStepper, Rollout};
use crate::table::{Cell, CsvTable};

/// Base of the infeasibility penalty.
pub const INFEASIBLE_PENALTY: f64 = 1e6;
/// Largest residual `‖F(x)‖∞` accepted for the start and target states.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// Instant at which decision `p_i` is charged by the running-cost comb.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChargeTime {
    /// `t = (i−1)T`, when the decision takes effect.
    IntervalStart,
    /// `t = iT`, the comb tooth closing the interval.
    #[default]
    IntervalEnd,
}

impl ChargeTime {
    pub fn label(self) -> &'static str {
        match self {
            ChargeTime::IntervalStart => "interval-start",
            ChargeTime::IntervalEnd => "interval-end",
        }
    }
}

/// Running-cost weight `1 − amplitude·e^{−rate·t}`.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayWeight {
    pub amplitude: f64,
    pub rate: f64,
}

impl Default for DecayWeight {
    fn default() -> Self {
        Self {
            amplitude: 0.3,
            rate: 1.0,
        }
    }
}

impl DecayWeight {
    pub fn at(&self, t: f64) -> f64 {
        1.0 - self.amplitude * (-self.rate * t).exp()
    }
}

/// Switch the expected state from `x_start` into the ε-ball of `x_target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingProblem {
    /// Rate constants; the control entry is the nominal value `p_ss`.
    pub model: Model,
    pub x_start: CoarseState,
    pub x_target: CoarseState,
    pub epsilon: f64,
    pub w_scale: f64,
    pub decay: DecayWeight,
    pub param_box: [f64; 2],
    pub charge_time: ChargeTime,
}

impl SwitchingProblem {
    pub const DEFAULT_EPSILON: f64 = 0.05;
    pub const DEFAULT_W_SCALE: f64 = 50.0;
    pub const DEFAULT_BOX: [f64; 2] = [0.0, 20.0];

    /// From the stable state with the smallest first coverage to the one with
    /// the largest, with default weights.
    pub fn bistable(model: Model) -> Result<Self> {
        let stable: Vec<CoarseState> = find_steady_states(&model)?
            .into_iter()
            .filter(|s| s.stability == Stability::Stable)
            .map(|s| s.state)
            .collect();
        if stable.len() < 2 {
            return Err(Error::Domain(format!(
                "switching needs two stable states, found {}",
                stable.len()
            )));
        }
        let problem = Self {
            model,
            x_start: stable[0],
            x_target: stable[stable.len() - 1],
            epsilon: Self::DEFAULT_EPSILON,
            w_scale: Self::DEFAULT_W_SCALE,
            decay: DecayWeight::default(),
            param_box: Self::DEFAULT_BOX,
            charge_time: ChargeTime::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn p_ss(&self) -> f64 {
        self.model.control()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for (name, x) in [("start", &self.x_start), ("target", &self.x_target)] {
            let residual = self
                .model
                .rhs(x)?
                .as_slice()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if residual >= STATIONARITY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "{name} state {:?} is not stationary (residual {residual:e})",
                    x.as_slice()
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.w_scale >= 0.0) {
            return Err(Error::InvalidArgument(format!("w_scale must be nonnegative, got {}", self.w_scale)));
        }
        let [lo, hi] = self.param_box;
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("parameter box [{lo}, {hi}] is empty")));
        }
        Ok(())
    }

    /// L1 distance of the decisions from the parameter box.
    pub fn box_violation(&self, values: &[f64]) -> f64 {
        let [lo, hi] = self.param_box;
        values.iter().map(|&v| (lo - v).max(0.0) + (v - hi).max(0.0)).sum()
    }
}

/// `T·Σ (p_i − p_ss)²·w(t_i)`, with `t_i` set by `charge`.
pub fn running_cost(policy: &Policy, decay: &DecayWeight, charge: ChargeTime) -> f64 {
    let shift = match charge {
        ChargeTime::IntervalStart => 0,
        ChargeTime::IntervalEnd => 1,
    };
    policy
        .values
        .iter()
        .enumerate()
        .map(|(i, p)| (p - policy.p_ss).powi(2) * decay.at(policy.interval_start(i + shift)))
        .sum::<f64>()
        * policy.interval
}

/// `w_scale·[1 − exp(−Σ_c R(|x_c − target_c| − ε))]`.
pub fn terminal_penalty(last: &CoarseState, problem: &SwitchingProblem) -> f64 {
    let excess: f64 = last
        .as_slice()
        .iter()
        .zip(problem.x_target.as_slice())
        .map(|(x, t)| ((x - t).abs() - problem.epsilon).max(0.0))
        .sum();
    problem.w_scale * (1.0 - (-excess).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub total: f64,
    pub q_part: f64,
    pub w_part: f64,
    /// Absent when the policy was rejected without simulation.
    pub final_state: Option<CoarseState>,
    pub feasible: bool,
}

impl ObjectiveReport {
    /// Run-log columns: `total, q_part, w_part, feasible, final coverages...`.
    pub fn log_table(reports: &[ObjectiveReport], model: &Model) -> CsvTable {
        let mut header = vec!["total", "q_part", "w_part", "feasible"];
        header.extend(crate::meanfield::coverage_columns(model));
        let mut table = CsvTable::new(header);
        for r in reports {
            let mut row = vec![
                Cell::from(r.total),
                Cell::from(r.q_part),
                Cell::from(r.w_part),
                Cell::from(if r.feasible { "true" } else { "false" }),
            ];
            match &r.final_state {
                Some(x) => row.extend(x.as_slice().iter().map(|&v| Cell::from(v))),
                None => row.extend((0..model.dim()).map(|_| Cell::from(""))),
            }
            table.push_row(row);
        }
        table
    }
}

fn check_consistent(policy: &Policy, problem: &SwitchingProblem, stepper: &dyn CoarseStepper) -> Result<()> {
    policy.validate()?;
    let mechanism = problem.model.mechanism();
    if policy.mechanism != mechanism || stepper.model().mechanism() != mechanism {
        return Err(Error::InvalidArgument(format!(
            "policy ({}), problem ({mechanism}) and stepper ({}) disagree on the mechanism",
            policy.mechanism,
            stepper.model().mechanism()
        )));
    }
    if (policy.p_ss - problem.p_ss()).abs() > 1e-12 * problem.p_ss().abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "policy nominal value {} differs from the problem's {}",
            policy.p_ss,
            problem.p_ss()
        )));
    }
    Ok(())
}

/// Objective value of `policy`, plus its rollout when it was simulated.
pub fn evaluate_detailed(
    policy: &Policy,
    problem: &SwitchingProblem,
    stepper: &dyn CoarseStepper,
    seed: u64,
) -> Result<(ObjectiveReport, Option<Rollout>)> {
    check_consistent(policy, problem, stepper)?;
    let violation = problem.box_violation(&policy.values);
    if violation > 0.0 {
        let report = ObjectiveReport {
            total: INFEASIBLE_PENALTY * (1.0 + violation),
            q_part: 0.0,
            w_part: 0.0,
            final_state: None,
            feasible: false,
        };
        return Ok((report, None));
    }
    let path = rollout(stepper, &problem.x_start, policy, seed)?;
    let last = path.final_state();
    let q_part = running_cost(policy, &problem.decay, problem.charge_time);
    let w_part = terminal_penalty(&last, problem);
    let report = ObjectiveReport {
        total: q_part + w_part,
        q_part,
        w_part,
        final_state: Some(last),
        feasible: true,
    };
    Ok((report, Some(path)))
}

pub fn evaluate(
    policy: &Policy,
    problem: &SwitchingProblem,
    stepper: &dyn CoarseStepper,
    seed: u64,
) -> Result<ObjectiveReport> {
    evaluate_detailed(policy, problem, stepper, seed).map(|(r, _)| r)
}

/// How evaluation seeds are chosen during a search.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    /// Evaluation `j` uses `derive(master, "evaluation", j)`.
    #[default]
    Fresh,
    /// Every evaluation reuses the master seed.
    Common,
}

/// Adapts a switching problem to the optimizer interface: the decision
/// vector is the list of policy values on a fixed grid.
pub struct PolicyObjective<'a> {
    problem: &'a SwitchingProblem,
    stepper: &'a dyn CoarseStepper,
    template: Policy,
    master_seed: u64,
    seed_mode: SeedMode,
    evaluations: u64,
    log: Vec<ObjectiveReport>,
}

impl<'a> PolicyObjective<'a> {
    pub fn new(
        problem: &'a SwitchingProblem,
        stepper: &'a dyn CoarseStepper,
        template: Policy,
        master_seed: u64,
        seed_mode: SeedMode,
    ) -> Result<Self> {
        check_consistent(&template, problem, stepper)?;
        Ok(Self {
            problem,
            stepper,
            template,
            master_seed,
            seed_mode,
            evaluations: 0,
            log: Vec::new(),
        })
    }

    pub fn template(&self) -> &Policy {
        &self.template
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Reports of every evaluation so far, in call order.
    pub fn log(&self) -> &[ObjectiveReport] {
        &self.log
    }

    pub fn policy(&self, x: &[f64]) -> Result<Policy> {
        self.template.with_values(x)
    }
}

impl Objective for PolicyObjective<'_> {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        let policy = self.template.with_values(x)?;
        let seed = match self.seed_mode {
            SeedMode::Fresh => seed::derive(self.master_seed, "evaluation", self.evaluations),
            SeedMode::Common => self.master_seed,
        };
        self.evaluations += 1;
        let report = evaluate(&policy, self.problem, self.stepper, seed)?;
        let total = report.total;
        self.log.push(report);
        Ok(total)
    }
}
