use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CoarseStepper, StepResult};
use crate::error::{Error, Result};
use crate::kmc::{lift, restrict, ssa_run, RngSeed};
use crate::meanfield::{CoarseState, Model};

/// Means with magnitude below this use the plain standard deviation as `d`.
pub const NEAR_ZERO_MEAN: f64 = 1e-9;

/// Ensemble size and accuracy settings of the stochastic stepper.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_sites: u64,
    pub m_replicas: usize,
    pub m_min: usize,
    pub m_max: usize,
    /// Target spread; `None` disables adaptation.
    pub d_max: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_sites: 10_000,
            m_replicas: 200,
            m_min: 50,
            m_max: 1600,
            d_max: None,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_sites == 0 {
            return bad("n_sites must be at least 1".into());
        }
        if !(1 <= self.m_min && self.m_min <= self.m_replicas && self.m_replicas <= self.m_max) {
            return bad(format!(
                "need 1 <= m_min <= m_replicas <= m_max, got {} / {} / {}",
                self.m_min, self.m_replicas, self.m_max
            ));
        }
        if let Some(d) = self.d_max {
            if !(d > 0.0) {
                return bad(format!("d_max must be positive, got {d}"));
            }
        }
        Ok(())
    }
}

/// Lift, evolve each replica by SSA, restrict and average.
#[derive(Debug, Clone)]
pub struct KmcStepper {
    model: Model,
    cfg: EnsembleConfig,
    keep_samples: bool,
}

impl KmcStepper {
    pub fn new(model: Model, cfg: EnsembleConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        Ok(Self {
            model,
            cfg,
            keep_samples: false,
        })
    }

    /// Attach the per-replica coverages to every [`StepResult`].
    pub fn with_samples(mut self, keep: bool) -> Self {
        self.keep_samples = keep;
        self
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }
}

/// Component-wise mean and relative standard error of `samples`, summed in
/// index order: `d = s / (√m · |mean|)`, so quadrupling the ensemble halves `d`.
fn statistics(samples: &[CoarseState]) -> (CoarseState, Vec<f64>) {
    let dim = samples[0].dim();
    let m = samples.len() as f64;
    let mut mean = [0.0; 2];
    for s in samples {
        for (acc, v) in mean.iter_mut().zip(s.as_slice()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let d = (0..dim)
        .map(|c| {
            let se = if samples.len() < 2 {
                0.0
            } else {
                let ss: f64 = samples.iter().map(|s| (s.get(c) - mean[c]).powi(2)).sum();
                (ss / (m - 1.0) / m).sqrt()
            };
            if mean[c].abs() < NEAR_ZERO_MEAN {
                se
            } else {
                se / mean[c].abs()
            }
        })
        .collect();
    (CoarseState::from_raw(mean, dim), d)
}

impl CoarseStepper for KmcStepper {
    fn name(&self) -> &'static str {
        "kmc"
    }

    fn model(&self) -> &Model {
        &self.model
    }

    fn step(&self, x: &CoarseState, control: f64, duration: f64, seed: u64) -> Result<StepResult> {
        self.model.check_dim(x)?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("step duration must be positive, got {duration}")));
        }
        let model = self.model.with_control(control);
        let start = lift(x, self.cfg.n_sites)?;
        let mut m = self.cfg.m_replicas.clamp(self.cfg.m_min, self.cfg.m_max);
        let mut samples: Vec<CoarseState> = Vec::with_capacity(m);
        loop {
            let fresh: Vec<CoarseState> = (samples.len()..m)
                .into_par_iter()
                .map(|j| ssa_run(&start, &model, duration, RngSeed::new(seed, j as u64)).map(|s| restrict(&s)))
                .collect::<Result<_>>()?;
            samples.extend(fresh);
            let (mean, d) = statistics(&samples);
            let worst = d.iter().copied().fold(0.0, f64::max);
            let settled = self.cfg.d_max.is_none_or(|d_max| worst <= d_max);
            if settled || m >= self.cfg.m_max {
                return Ok(StepResult {
                    mean,
                    d,
                    m_used: m,
                    samples: self.keep_samples.then_some(samples),
                });
            }
            m = (2 * m).clamp(self.cfg.m_min, self.cfg.m_max);
        }
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{integrate_to, CoParams, NoParams, OdeOptions};

    fn cfg(n_sites: u64, m: usize) -> EnsembleConfig {
        EnsembleConfig {
            n_sites,
            m_replicas: m,
            m_min: 1,
            m_max: 4 * m,
            d_max: None,
        }
    }

    #[test]
    fn frozen_dynamics_return_the_lifted_state() {
        let frozen = Model::No(NoParams { alpha: 0.0, gamma: 0.0, k: 0.0 });
        let s = KmcStepper::new(frozen, cfg(1000, 8)).unwrap();
        let x = CoarseState::scalar(0.3301);
        let r = s.step(&x, 0.0, 0.25, 1).unwrap();
        assert_eq!(r.mean, restrict(&lift(&x, 1000).unwrap()));
        assert_eq!(r.d, vec![0.0]);
        assert_eq!(r.m_used, 8);
    }

    #[test]
    fn vacuous_bound_never_adapts() {
        let mut c = cfg(400, 6);
        c.d_max = Some(1e6);
        let s = KmcStepper::new(Model::Co(CoParams::reference()), c).unwrap();
        let r = s.step(&CoarseState::pair(0.14, 0.63), 3.5, 0.25, 3).unwrap();
        assert_eq!(r.m_used, 6);
    }

    #[test]
    fn tight_bound_doubles_up_to_the_cap() {
        let mut c = cfg(100, 4);
        c.d_max = Some(1e-9);
        let s = KmcStepper::new(Model::No(NoParams::reference()), c).unwrap().with_samples(true);
        let r = s.step(&CoarseState::scalar(0.33), 4.5, 0.25, 3).unwrap();
        assert_eq!(r.m_used, 16);
        assert_eq!(r.samples.as_ref().unwrap().len(), 16);
        // the first replicas are the unadapted run's replicas
        let small = KmcStepper::new(Model::No(NoParams::reference()), cfg(100, 4))
            .unwrap()
            .with_samples(true)
            .step(&CoarseState::scalar(0.33), 4.5, 0.25, 3)
            .unwrap();
        assert_eq!(small.samples.unwrap()[..], r.samples.unwrap()[..4]);
    }

    #[test]
    fn ensemble_mean_tracks_the_ode() {
        let m = Model::No(NoParams::reference());
        let s = KmcStepper::new(m, cfg(10_000, 200)).unwrap();
        let x = CoarseState::scalar(0.3301);
        let r = s.step(&x, 4.5, 0.25, 42).unwrap();
        let ode = integrate_to(&m, &x, 0.25, &OdeOptions::default()).unwrap();
        let se = r.d[0] * r.mean.get(0);
        assert!((r.mean.get(0) - ode.get(0)).abs() <= 3.0 * se + 1.0 / 10_000.0, "{r:?} vs {ode:?}");
    }

    #[test]
    fn near_zero_mean_uses_plain_standard_error() {
        let (_, d) = statistics(&[CoarseState::scalar(0.0), CoarseState::scalar(0.0)]);
        assert_eq!(d, vec![0.0]);
        let (mean, d) = statistics(&[CoarseState::scalar(0.1), CoarseState::scalar(0.3)]);
        assert!((mean.get(0) - 0.2).abs() < 1e-15);
        assert!((d[0] - 0.01f64.sqrt() / 0.2).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let m = Model::No(NoParams::reference());
        let mut c = cfg(100, 4);
        c.m_min = 5;
        assert!(KmcStepper::new(m, c).is_err());
        let mut c = cfg(100, 4);
        c.d_max = Some(0.0);
        assert!(KmcStepper::new(m, c).is_err());
        assert!(KmcStepper::new(m, cfg(0, 4)).is_err());
    }
}
