use serde::{Deserialize, Serialize};

use super::{refine_timestep, Objective, Optimizer, SearchSpec, SearchTrace};
use crate::error::{Error, Result};
use crate::objective::Policy;

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultigridOptions {
    /// Strictly decreasing interval lengths, each dividing the horizon.
    pub schedule: Vec<f64>,
    /// Stage `k` searches with the template scales times `scale_shrink^k`.
    pub scale_shrink: f64,
    /// Repeat the finest stage once more (only when the schedule has two or more entries).
    pub second_pass: bool,
}

impl Default for MultigridOptions {
    fn default() -> Self {
        Self {
            schedule: vec![0.5, 0.25, 0.1],
            scale_shrink: 0.5,
            second_pass: true,
        }
    }
}

impl MultigridOptions {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() || self.schedule.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "schedule must hold positive interval lengths: {:?}",
                self.schedule
            )));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "schedule must be strictly decreasing: {:?}",
                self.schedule
            )));
        }
        if !(self.scale_shrink > 0.0 && self.scale_shrink <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "scale_shrink must lie in (0, 1], got {}",
                self.scale_shrink
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub interval: f64,
    pub second_pass: bool,
    pub scales: Vec<f64>,
    /// The stage optimum.
    pub policy: Policy,
    pub trace: SearchTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultigridTrace {
    pub stages: Vec<StageRecord>,
}

impl MultigridTrace {
    pub fn final_policy(&self) -> &Policy {
        &self.stages.last().expect("at least one stage").policy
    }
}

/// Optimizes on each interval length of the schedule in turn, warm-starting
/// every stage from the spline-resampled optimum of the previous one.
///
/// `objective_for` builds the objective for a policy grid; `template`
/// supplies scales and the per-stage budget (its `x0` is ignored).
pub fn multigrid_search<'o>(
    optimizer: &dyn Optimizer,
    template: &SearchSpec,
    initial: &Policy,
    options: &MultigridOptions,
    param_box: [f64; 2],
    objective_for: &mut dyn FnMut(&Policy) -> Result<Box<dyn Objective + 'o>>,
) -> Result<MultigridTrace> {
    options.validate()?;
    let mut plan: Vec<(f64, bool, usize)> = options
        .schedule
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, false, k))
        .collect();
    if options.second_pass && options.schedule.len() >= 2 {
        let (t, _, k) = *plan.last().expect("nonempty");
        plan.push((t, true, k));
    }
    let mut policy = initial.clone();
    let mut stages = Vec::with_capacity(plan.len());
    for (interval, second_pass, k) in plan {
        if (policy.interval - interval).abs() > 1e-12 {
            policy = refine_timestep(&policy, interval, param_box)?;
        }
        let shrink = options.scale_shrink.powi(k as i32);
        let spec = SearchSpec {
            x0: policy.values.clone(),
            directions: None,
            scales: template.scales.iter().map(|s| s * shrink).collect(),
            max_evals: template.max_evals,
        };
        let mut objective = objective_for(&policy)?;
        let trace = optimizer.minimize(&spec, objective.as_mut())?;
        policy = policy.with_values(&trace.best_x)?;
        stages.push(StageRecord {
            interval,
            second_pass,
            scales: spec.scales,
            policy: policy.clone(),
            trace,
        });
    }
    Ok(MultigridTrace { stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::Mechanism;
    use crate::optim::{FnObjective, HookeJeeves, NelderMead};

    /// Squared L2 distance between the piecewise-constant profile and a smooth
    /// target, integrated exactly per interval.
    fn tracking_error(target: fn(f64) -> f64, interval: f64) -> impl FnMut(&[f64]) -> f64 {
        move |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| {
                    let a = i as f64 * interval;
                    (0..64)
                        .map(|q| {
                            let t = a + (q as f64 + 0.5) * interval / 64.0;
                            (v - target(t)).powi(2) * interval / 64.0
                        })
                        .sum::<f64>()
                })
                .sum()
        }
    }

    #[test]
    fn stage_bests_are_non_increasing_on_a_convex_objective() {
        let target = |t: f64| 5.0 + 2.0 * (t * 1.3).sin();
        let initial = Policy::constant(Mechanism::Co, 0.5, 10, 3.5).unwrap();
        let template = SearchSpec::new(vec![], vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125], 20_000);
        let options = MultigridOptions {
            schedule: vec![0.5, 0.25, 0.1],
            ..MultigridOptions::default()
        };
        let trace = multigrid_search(&HookeJeeves, &template, &initial, &options, [0.0, 20.0], &mut |p: &Policy| {
            Ok(Box::new(FnObjective(tracking_error(target, p.interval))) as Box<dyn Objective>)
        })
        .unwrap();
        assert_eq!(trace.stages.len(), 4);
        assert!(trace.stages[3].second_pass);
        assert_eq!(trace.final_policy().intervals, 50);
        let bests: Vec<f64> = trace.stages.iter().map(|s| s.trace.best_f).collect();
        assert!(bests.windows(2).all(|w| w[1] <= w[0]), "{bests:?}");
        assert_eq!(trace.stages[1].scales[0], 0.5);
    }

    #[test]
    fn single_stage_equals_plain_search() {
        let target = |t: f64| 2.0 + t;
        let initial = Policy::constant(Mechanism::No, 0.25, 20, 4.5).unwrap();
        let template = SearchSpec::new(vec![], vec![1.0, 0.5, 0.25], 5_000);
        let options = MultigridOptions {
            schedule: vec![0.25],
            ..MultigridOptions::default()
        };
        let trace = multigrid_search(&NelderMead, &template, &initial, &options, [0.0, 20.0], &mut |p: &Policy| {
            Ok(Box::new(FnObjective(tracking_error(target, p.interval))) as Box<dyn Objective>)
        })
        .unwrap();
        let plain = NelderMead
            .minimize(
                &SearchSpec::new(initial.values.clone(), template.scales.clone(), 5_000),
                &mut FnObjective(tracking_error(target, 0.25)),
            )
            .unwrap();
        assert_eq!(trace.stages.len(), 1);
        assert_eq!(trace.stages[0].trace, plain);
    }

    #[test]
    fn bad_schedules() {
        let mut o = MultigridOptions {
            schedule: vec![0.1, 0.5],
            ..Default::default()
        };
        assert!(o.validate().is_err());
        o.schedule = vec![];
        assert!(o.validate().is_err());
        o.schedule = vec![0.5];
        o.scale_shrink = 0.0;
        assert!(o.validate().is_err());
    }
}
