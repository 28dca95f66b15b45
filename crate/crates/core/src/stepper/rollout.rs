use serde::{Deserialize, Serialize};

use super::{CoarseStepper, StepResult};
use crate::error::{Error, Result};
use crate::meanfield::{coverage_columns, CoarseState, Model};
use crate::objective::Policy;
use crate::seed;
use crate::table::{Cell, CsvTable};

/// Coarse trajectory of a policy: the start state and one step per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub x0: CoarseState,
    pub interval: f64,
    pub p_ss: f64,
    pub controls: Vec<f64>,
    pub steps: Vec<StepResult>,
}

impl Rollout {
    pub fn final_state(&self) -> CoarseState {
        self.steps.last().map_or(self.x0, |s| s.mean)
    }

    /// `x_0, x_1, …, x_N`.
    pub fn states(&self) -> Vec<CoarseState> {
        std::iter::once(self.x0).chain(self.steps.iter().map(|s| s.mean)).collect()
    }

    /// Columns `t, <control>, <coverages>, <d per coverage>, m_used`; the
    /// first row is the start state under `p_ss` with `m_used = 0`.
    pub fn to_csv(&self, model: &Model) -> CsvTable {
        let cov = coverage_columns(model);
        let mut header = vec!["t".to_owned(), model.control_name().to_owned()];
        header.extend(cov.iter().map(|c| c.to_string()));
        header.extend(cov.iter().map(|c| format!("d_{c}")));
        header.push("m_used".to_owned());
        let mut table = CsvTable::new(header);
        let mut push = |t: f64, p: f64, x: &CoarseState, d: &[f64], m: usize| {
            let mut row = vec![Cell::from(t), Cell::from(p)];
            row.extend(x.as_slice().iter().map(|&v| Cell::from(v)));
            row.extend(d.iter().map(|&v| Cell::from(v)));
            row.push(Cell::from(m));
            table.push_row(row);
        };
        push(0.0, self.p_ss, &self.x0, &vec![0.0; self.x0.dim()], 0);
        for (i, (p, s)) in self.controls.iter().zip(&self.steps).enumerate() {
            push((i + 1) as f64 * self.interval, *p, &s.mean, &s.d, s.m_used);
        }
        table
    }
}

/// Applies the policy interval by interval, re-lifting from each coarse mean.
/// Interval `i` (0-based) uses the seed `derive(seed, "interval", i)`.
pub fn rollout(stepper: &dyn CoarseStepper, x0: &CoarseState, policy: &Policy, seed: u64) -> Result<Rollout> {
    policy.validate()?;
    if policy.mechanism != stepper.model().mechanism() {
        return Err(Error::InvalidArgument(format!(
            "{} policy cannot drive a {} stepper",
            policy.mechanism,
            stepper.model().mechanism()
        )));
    }
    let mut x = *x0;
    let mut steps = Vec::with_capacity(policy.intervals);
    for (i, &p) in policy.values.iter().enumerate() {
        let r = stepper.step(&x, p, policy.interval, seed::derive(seed, "interval", i as u64))?;
        x = r.mean;
        steps.push(r);
    }
    Ok(Rollout {
        x0: *x0,
        interval: policy.interval,
        p_ss: policy.p_ss,
        controls: policy.values.clone(),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{find_steady_states, Mechanism, NoParams, OdeOptions};
    use crate::stepper::{EnsembleConfig, KmcStepper, LegacyStepper};

    #[test]
    fn constant_policy_stays_at_low_state() {
        let m = Model::No(NoParams::reference());
        let low = find_steady_states(&m).unwrap()[0].state;
        let s = LegacyStepper::new(m, OdeOptions::default()).unwrap();
        let p = Policy::constant(Mechanism::No, 0.25, 20, 4.5).unwrap();
        let r = rollout(&s, &low, &p, 0).unwrap();
        assert_eq!(r.steps.len(), 20);
        assert!(r.final_state().max_abs_diff(&low) < 1e-4);
        let csv = r.to_csv(&m).render();
        assert!(csv.starts_with("t,k,theta,d_theta,m_used\n"));
        assert_eq!(csv.lines().count(), 22);
    }

    #[test]
    fn single_interval_is_one_step() {
        let m = Model::No(NoParams::reference());
        let cfg = EnsembleConfig { n_sites: 400, m_replicas: 10, m_min: 1, m_max: 10, d_max: None };
        let s = KmcStepper::new(m, cfg).unwrap();
        let x = CoarseState::scalar(0.5);
        let p = Policy::new(Mechanism::No, 0.3, 4.5, vec![2.0]).unwrap();
        let r = rollout(&s, &x, &p, 8).unwrap();
        let direct = s.step(&x, 2.0, 0.3, seed::derive(8, "interval", 0)).unwrap();
        assert_eq!(r.steps, vec![direct]);
    }

    #[test]
    fn mechanism_mismatch_is_rejected() {
        let s = LegacyStepper::new(Model::No(NoParams::reference()), OdeOptions::default()).unwrap();
        let p = Policy::constant(Mechanism::Co, 0.25, 2, 3.5).unwrap();
        assert!(rollout(&s, &CoarseState::scalar(0.3), &p, 0).is_err());
    }
}
