use std::path::PathBuf;

use coarse_switch::kmc::{lift, restrict, ssa_advance, EventSink, EventTrace, NoTrace, RngSeed};
use coarse_switch::meanfield::{coverage_columns, integrate_to, CoarseState, Model, OdeOptions};
use coarse_switch::objective::Policy;
use coarse_switch::table::{Cell, CsvTable};

use super::Run;
use crate::config::load_policy;
use crate::error::{CliError, CliResult};

pub struct SimulateArgs {
    pub mode: Option<String>,
    pub policy: Option<PathBuf>,
    pub t_end: Option<f64>,
    pub sample_dt: f64,
    pub initial: Option<Vec<f64>>,
    pub events: bool,
}

/// Sample times `0, dt, 2dt, …` below `t_end`, then `t_end`.
fn sample_times(t_end: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0u64;
    loop {
        let t = i as f64 * dt;
        if t >= t_end - 1e-12 * t_end.max(1.0) {
            break;
        }
        out.push(t);
        i += 1;
    }
    out.push(t_end);
    out
}

/// Piecewise-constant control; `None` holds the nominal value.
struct Schedule<'a> {
    policy: Option<&'a Policy>,
    nominal: f64,
}

impl Schedule<'_> {
    fn at(&self, t: f64) -> f64 {
        self.policy.map_or(self.nominal, |p| p.value_at(t))
    }

    /// Sample times merged with the control switch times.
    fn breakpoints(&self, samples: &[f64]) -> Vec<(f64, bool)> {
        let t_end = *samples.last().expect("nonempty");
        let mut points: Vec<(f64, bool)> = samples.iter().map(|&t| (t, true)).collect();
        if let Some(p) = self.policy {
            points.extend(
                (1..p.intervals)
                    .map(|i| p.interval_start(i))
                    .filter(|&t| t < t_end)
                    .map(|t| (t, false)),
            );
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        points.dedup_by(|b, a| a.0 == b.0);
        points
    }
}

fn table(model: &Model) -> CsvTable {
    let mut header = vec!["t", model.control_name()];
    header.extend(coverage_columns(model));
    CsvTable::new(header)
}

fn push(table: &mut CsvTable, t: f64, control: f64, x: &CoarseState) {
    let mut row = vec![Cell::from(t), Cell::from(control)];
    row.extend(x.as_slice().iter().map(|&v| Cell::from(v)));
    table.push_row(row);
}

fn ode_path(model: &Model, x0: CoarseState, schedule: &Schedule, samples: &[f64], ode: &OdeOptions) -> CliResult<CsvTable> {
    let mut out = table(model);
    let points = schedule.breakpoints(samples);
    let mut x = x0;
    push(&mut out, 0.0, schedule.at(0.0), &x);
    for w in points.windows(2) {
        let (a, (b, sampled)) = (w[0].0, w[1]);
        x = integrate_to(&model.with_control(schedule.at(a)), &x, b - a, ode)?;
        if sampled {
            push(&mut out, b, schedule.at(b), &x);
        }
    }
    Ok(out)
}

fn kmc_path<S: EventSink>(
    model: &Model,
    x0: CoarseState,
    n_sites: u64,
    schedule: &Schedule,
    samples: &[f64],
    seed: u64,
    sink: &mut S,
) -> CliResult<CsvTable> {
    let mut out = table(model);
    let points = schedule.breakpoints(samples);
    let mut micro = lift(&x0, n_sites)?;
    let mut rng = RngSeed::new(seed, 0).rng();
    push(&mut out, 0.0, schedule.at(0.0), &restrict(&micro));
    for w in points.windows(2) {
        let (a, (b, sampled)) = (w[0].0, w[1]);
        ssa_advance(&mut micro, &model.with_control(schedule.at(a)), b, &mut rng, sink)?;
        if sampled {
            push(&mut out, b, schedule.at(b), &restrict(&micro));
        }
    }
    Ok(out)
}

pub fn simulate(run: &mut Run, args: &SimulateArgs) -> CliResult<()> {
    let config = run.config.clone();
    let model = config.model;
    let mode = args.mode.clone().unwrap_or_else(|| config.stepper.kind.clone());
    let policy = args.policy.as_deref().map(load_policy).transpose()?;
    if let Some(p) = &policy {
        if p.mechanism != model.mechanism() {
            return Err(CliError::Config(format!(
                "policy is for {}, the model is {}",
                p.mechanism,
                model.mechanism()
            )));
        }
    }
    let horizon = policy
        .as_ref()
        .map_or(config.policy.interval * config.policy.intervals as f64, Policy::horizon);
    let t_end = args.t_end.unwrap_or(horizon);
    if !(t_end > 0.0 && t_end.is_finite()) || !(args.sample_dt > 0.0 && args.sample_dt.is_finite()) {
        return Err(CliError::Config(format!(
            "t_end and sample_dt must be positive (got {t_end}, {})",
            args.sample_dt
        )));
    }
    let x0 = match &args.initial {
        Some(v) => CoarseState::from_slice(v)?,
        None => config.problem()?.x_start,
    };
    let schedule = Schedule {
        policy: policy.as_ref(),
        nominal: model.control(),
    };
    let samples = sample_times(t_end, args.sample_dt);
    let path = match mode.as_str() {
        "legacy" => {
            if args.events {
                return Err(CliError::Config("--events needs kmc mode".into()));
            }
            ode_path(&model, x0, &schedule, &samples, &config.stepper.ode)?
        }
        "kmc" => {
            let seed = run.seed("simulate", 0);
            let n_sites = config.stepper.ensemble.n_sites;
            if args.events {
                let mut trace = EventTrace::new(&model);
                let path = kmc_path(&model, x0, n_sites, &schedule, &samples, seed, &mut trace)?;
                run.out.text("events.csv", &trace.into_table().render())?;
                path
            } else {
                kmc_path(&model, x0, n_sites, &schedule, &samples, seed, &mut NoTrace)?
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "simulate mode must be `legacy` or `kmc`, got `{other}`"
            )))
        }
    };
    run.out.text("simulate.csv", &path.render())?;
    println!("{mode} trajectory to t = {t_end}: {} samples", samples.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use coarse_switch::meanfield::Mechanism;

    #[test]
    fn samples_end_exactly_at_t_end() {
        assert_eq!(sample_times(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let s = sample_times(1.0, 0.3);
        assert_eq!(s.len(), 5);
        assert_eq!(*s.last().unwrap(), 1.0);
    }

    #[test]
    fn breakpoints_merge_switches() {
        let p = Policy::new(Mechanism::No, 0.5, 4.5, vec![1.0, 2.0, 3.0]).unwrap();
        let s = Schedule {
            policy: Some(&p),
            nominal: 4.5,
        };
        let b = s.breakpoints(&[0.0, 0.4, 0.5, 1.2]);
        assert_eq!(b, vec![(0.0, true), (0.4, true), (0.5, true), (1.0, false), (1.2, true)]);
    }
}
