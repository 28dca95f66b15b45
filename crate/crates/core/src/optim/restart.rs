use serde::{Deserialize, Serialize};

use super::{Objective, Optimizer, SearchSpec, SearchTrace};
use crate::error::{Error, Result};

/// When two consecutive passes count as agreeing.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "tol")]
pub enum Agreement {
    Absolute(f64),
    /// Fraction of the previous pass's best value.
    Relative(f64),
}

impl Default for Agreement {
    fn default() -> Self {
        Agreement::Relative(0.01)
    }
}

impl Agreement {
    pub fn holds(&self, previous: f64, current: f64) -> bool {
        let tol = match *self {
            Agreement::Absolute(t) => t,
            Agreement::Relative(t) => t * previous.abs(),
        };
        (current - previous).abs() <= tol
    }

    fn validate(&self) -> Result<()> {
        let (Agreement::Absolute(t) | Agreement::Relative(t)) = *self;
        if t > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("agreement tolerance must be positive, got {t}")))
        }
    }
}

/// Reruns `optimizer` from the previous best, with the full scale ladder,
/// until two consecutive passes agree or `cap` passes have run.
///
/// The budget in `spec` is shared by all passes. The result reports the last
/// pass's incumbent and every pass's iteration records.
pub fn restart_until_stable(
    optimizer: &dyn Optimizer,
    spec: &SearchSpec,
    f: &mut dyn Objective,
    agreement: Agreement,
    cap: usize,
) -> Result<SearchTrace> {
    agreement.validate()?;
    if cap == 0 {
        return Err(Error::InvalidArgument("restart cap must be at least 1".into()));
    }
    let mut total = optimizer.minimize(spec, f)?;
    let mut previous = total.best_f;
    loop {
        let remaining = spec.max_evals.saturating_sub(total.eval_count);
        if total.passes >= cap {
            total.restart_cap_hit = true;
            return Ok(total);
        }
        if total.budget_exhausted || remaining == 0 {
            total.budget_exhausted = true;
            return Ok(total);
        }
        let pass_spec = SearchSpec {
            x0: total.best_x.clone(),
            max_evals: remaining,
            ..spec.clone()
        };
        let pass = optimizer.minimize(&pass_spec, f)?;
        let offset = total.eval_count;
        total.passes += 1;
        total.iterations.extend(pass.iterations.into_iter().map(|mut r| {
            r.pass = total.passes;
            r.eval_count += offset;
            r
        }));
        total.eval_count += pass.eval_count;
        total.best_x = pass.best_x;
        total.best_f = pass.best_f;
        total.budget_exhausted = pass.budget_exhausted;
        if agreement.holds(previous, pass.best_f) {
            return Ok(total);
        }
        previous = pass.best_f;
    }
}

/// Any optimizer wrapped in [`restart_until_stable`].
#[derive(Debug)]
pub struct Restarting {
    pub inner: Box<dyn Optimizer>,
    pub agreement: Agreement,
    pub cap: usize,
}

impl Optimizer for Restarting {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn minimize(&self, spec: &SearchSpec, f: &mut dyn Objective) -> Result<SearchTrace> {
        restart_until_stable(self.inner.as_ref(), spec, f, self.agreement, self.cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::tests::bowl;
    use crate::optim::{FnObjective, HookeJeeves};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn convex_objective_stops_after_two_passes() {
        let mut f = bowl(vec![0.3, -0.6]);
        let spec = SearchSpec::new(vec![2.0, 2.0], vec![1.0, 0.5, 0.25, 0.125], 10_000);
        let t = restart_until_stable(&HookeJeeves, &spec, &mut f, Agreement::default(), 5).unwrap();
        assert_eq!(t.passes, 2);
        assert!(!t.restart_cap_hit);
        assert!(t.iterations.iter().any(|r| r.pass == 2));
        let last = t.iterations.last().unwrap();
        assert_eq!(last.eval_count, t.eval_count);
    }

    #[test]
    fn shared_budget_is_respected() {
        let mut n = 0;
        let mut f = FnObjective(|x: &[f64]| {
            n += 1;
            x.iter().map(|v| v * v).sum()
        });
        let spec = SearchSpec::new(vec![40.0, -40.0], vec![1.0], 25);
        let t = restart_until_stable(&HookeJeeves, &spec, &mut f, Agreement::Absolute(1e-12), 5).unwrap();
        assert!(t.eval_count <= 25);
        assert!(t.budget_exhausted);
        assert_eq!(n, 25);
    }

    #[test]
    fn noisy_objective_terminates_within_cap() {
        let sigma = 0.01;
        let mut stopped = 0;
        for draw in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(draw);
            let mut f = FnObjective(move |x: &[f64]| {
                let noise: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
                x.iter().map(|v| v * v).sum::<f64>() + sigma * noise
            });
            let spec = SearchSpec::new(vec![1.5, -1.0], vec![1.0, 0.5, 0.25], 10_000);
            let t = restart_until_stable(&HookeJeeves, &spec, &mut f, Agreement::Absolute(3.0 * sigma), 5).unwrap();
            stopped += usize::from(!t.restart_cap_hit);
        }
        assert!(stopped >= 95, "{stopped}/100 agreed before the cap");
    }

    #[test]
    fn agreement_rules() {
        assert!(Agreement::Relative(0.01).holds(100.0, 100.9));
        assert!(!Agreement::Relative(0.01).holds(100.0, 98.0));
        assert!(Agreement::Absolute(0.5).holds(1.0, 0.6));
        assert!(Agreement::Absolute(0.0).validate().is_err());
    }
}
