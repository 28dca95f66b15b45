use std::cell::RefCell;
use std::path::Path;
use std::rc::Rc;

use coarse_switch::objective::{self, evaluate_detailed, ObjectiveReport, Policy, PolicyObjective, SwitchingProblem};
use coarse_switch::optim::{multigrid_search, noise_floor, refine_timestep, NoiseFloor, Objective, SearchSpec, SearchTrace};
use coarse_switch::meanfield::coverage_columns;
use coarse_switch::stepper::CoarseStepper;
use coarse_switch::table::{Cell, CsvTable};
use coarse_switch::Result as CoreResult;
use serde::{Deserialize, Serialize};

use super::Run;
use crate::config::load_policy;
use crate::error::{CliError, CliResult};

fn policy_or_initial(run: &Run, path: Option<&Path>) -> CliResult<Policy> {
    match path {
        Some(p) => load_policy(p),
        None => run.config.initial_policy(),
    }
}

/// Writes the rollout CSV and report of `policy` under `name`.
fn report_rollout(
    run: &mut Run,
    name: &str,
    policy: &Policy,
    problem: &SwitchingProblem,
    stepper: &dyn CoarseStepper,
    seed: u64,
) -> CliResult<ObjectiveReport> {
    let (report, path) = evaluate_detailed(policy, problem, stepper, seed)?;
    if let Some(path) = path {
        run.out.text(&format!("{name}.csv"), &path.to_csv(&problem.model).render())?;
    }
    Ok(report)
}

pub fn rollout(run: &mut Run, policy: Option<&Path>) -> CliResult<()> {
    let policy = policy_or_initial(run, policy)?;
    let problem = run.config.problem()?;
    let stepper = run.config.stepper()?;
    let seed = run.seed("rollout", 0);
    let report = report_rollout(run, "rollout", &policy, &problem, stepper.as_ref(), seed)?;
    run.out.json("rollout-report.json", &report)?;
    println!(
        "objective {:.6} (running {:.6}, terminal {:.6})",
        report.total, report.q_part, report.w_part
    );
    Ok(())
}

pub fn refine(run: &mut Run, path: &Path, new_t: f64) -> CliResult<()> {
    let policy = load_policy(path)?;
    let refined = refine_timestep(&policy, new_t, run.config.problem.param_box)?;
    run.out.json("policy-refined.json", &refined)?;
    println!("refined T {} -> {new_t}: N {} -> {}", policy.interval, policy.intervals, refined.intervals);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub stepper: String,
    pub repeats: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single repeat.
    pub std: Option<f64>,
    pub values: Vec<f64>,
    pub reports: Vec<ObjectiveReport>,
}

pub fn evaluate(run: &mut Run, policy: Option<&Path>, repeats: usize, stepper: Option<&str>) -> CliResult<()> {
    if repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    let policy = policy_or_initial(run, policy)?;
    let problem = run.config.problem()?;
    let kind = stepper.unwrap_or(&run.config.stepper.kind).to_owned();
    let stepper = run.config.stepper_named(&kind)?;
    let mut reports = Vec::with_capacity(repeats);
    for j in 0..repeats {
        let seed = run.seed("evaluate", j as u64);
        reports.push(objective::evaluate(&policy, &problem, stepper.as_ref(), seed)?);
    }
    let values: Vec<f64> = reports.iter().map(|r| r.total).collect();
    let mean = values.iter().sum::<f64>() / repeats as f64;
    let std = (repeats > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt());
    let summary = EvaluateSummary {
        stepper: kind,
        repeats,
        mean,
        std,
        values,
        reports,
    };
    run.out.json("evaluate.json", &summary)?;
    match std {
        Some(s) => println!("mean {mean:.6}, std {s:.6} over {repeats} repeats"),
        None => println!("objective {mean:.6} (single repeat)"),
    }
    Ok(())
}

/// A policy objective whose reports are also appended to a shared log.
struct Logged<'a> {
    inner: PolicyObjective<'a>,
    stage: usize,
    log: Rc<RefCell<Vec<(usize, ObjectiveReport)>>>,
}

impl Objective for Logged<'_> {
    fn evaluate(&mut self, x: &[f64]) -> CoreResult<f64> {
        let v = self.inner.evaluate(x)?;
        let report = self.inner.log().last().expect("just evaluated").clone();
        self.log.borrow_mut().push((self.stage, report));
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub interval: f64,
    pub intervals: usize,
    pub second_pass: bool,
    pub scales: Vec<f64>,
    pub seed: u64,
    pub initial_f: f64,
    pub best_f: f64,
    pub eval_count: usize,
    pub passes: usize,
    /// The stage optimum evaluated with the mean-field stepper.
    pub legacy: ObjectiveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub algorithm: String,
    pub stepper: String,
    pub initial_f: f64,
    pub best_f: f64,
    pub eval_count: usize,
    pub passes: usize,
    pub budget_exhausted: bool,
    pub restart_cap_hit: bool,
    /// Fresh evaluation of the optimum with the search stepper.
    pub final_report: ObjectiveReport,
    /// The optimum evaluated with the mean-field stepper.
    pub legacy_report: ObjectiveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_floor: Option<NoiseFloor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<StageSummary>>,
}

fn stage_name(k: usize) -> String {
    format!("stage{k}")
}

pub fn optimize(run: &mut Run, max_evals: Option<usize>) -> CliResult<()> {
    let config = run.config.clone();
    let problem = config.problem()?;
    let stepper = config.stepper()?;
    let legacy = config.stepper_named("legacy")?;
    let optimizer = config.optimizer()?;
    let initial = config.initial_policy()?;
    let mut template = config.search_template();
    if let Some(m) = max_evals {
        template.max_evals = m;
    }
    let seed_mode = config.optimizer.seed_mode;

    let noise = match config.optimizer.noise_check_repeats {
        Some(repeats) if !stepper.is_deterministic() => {
            let seed = run.seed("noise", 0);
            let mut obj = PolicyObjective::new(&problem, stepper.as_ref(), initial.clone(), seed, seed_mode)?;
            let spec = SearchSpec::new(initial.values.clone(), template.scales.clone(), 0);
            Some(noise_floor(&mut obj, &initial.values, spec.smallest_scale(), &spec.directions(), repeats)?)
        }
        _ => None,
    };

    let log = Rc::new(RefCell::new(Vec::new()));
    let (best, trace, stages) = match &config.optimizer.multigrid {
        Some(options) => {
            let stage_count = options.schedule.len() + usize::from(options.second_pass && options.schedule.len() >= 2);
            let seeds: Vec<u64> = (0..stage_count)
                .map(|k| run.seed("optimize", k as u64))
                .collect();
            let mut stage = 0usize;
            let mg = multigrid_search(
                optimizer.as_ref(),
                &template,
                &initial,
                options,
                problem.param_box,
                &mut |p: &Policy| {
                    let inner = PolicyObjective::new(&problem, stepper.as_ref(), p.clone(), seeds[stage], seed_mode)?;
                    stage += 1;
                    Ok(Box::new(Logged {
                        inner,
                        stage: stage - 1,
                        log: Rc::clone(&log),
                    }) as Box<dyn Objective>)
                },
            )?;
            let mut summaries = Vec::with_capacity(mg.stages.len());
            for (k, s) in mg.stages.iter().enumerate() {
                run.out.json(&format!("policy-{}.json", stage_name(k)), &s.policy)?;
                run.out.text(&format!("trace-{}.jsonl", stage_name(k)), &s.trace.to_json_lines())?;
                summaries.push(StageSummary {
                    stage: k,
                    interval: s.interval,
                    intervals: s.policy.intervals,
                    second_pass: s.second_pass,
                    scales: s.scales.clone(),
                    seed: seeds[k],
                    initial_f: s.trace.initial_f,
                    best_f: s.trace.best_f,
                    eval_count: s.trace.eval_count,
                    passes: s.trace.passes,
                    legacy: objective::evaluate(&s.policy, &problem, legacy.as_ref(), 0)?,
                });
            }
            let last = mg.stages.last().expect("at least one stage");
            let total = SearchTrace {
                eval_count: mg.stages.iter().map(|s| s.trace.eval_count).sum(),
                initial_f: mg.stages[0].trace.initial_f,
                ..last.trace.clone()
            };
            (mg.final_policy().clone(), total, Some(summaries))
        }
        None => {
            let seed = run.seed("optimize", 0);
            let inner = PolicyObjective::new(&problem, stepper.as_ref(), initial.clone(), seed, seed_mode)?;
            let mut objective = Logged {
                inner,
                stage: 0,
                log: Rc::clone(&log),
            };
            let spec = SearchSpec {
                x0: initial.values.clone(),
                ..template.clone()
            };
            let trace = optimizer.minimize(&spec, &mut objective)?;
            run.out.text("trace.jsonl", &trace.to_json_lines())?;
            (initial.with_values(&trace.best_x)?, trace, None)
        }
    };

    let mut policy = best;
    policy.seed = Some(config.master_seed);
    run.out.json("policy.json", &policy)?;
    let evaluations: Vec<(usize, ObjectiveReport)> = log.borrow().clone();
    run.out.text("evaluations.csv", &evaluation_table(&evaluations, &problem).render())?;

    let final_seed = run.seed("final", 0);
    let final_report = report_rollout(run, "rollout", &policy, &problem, stepper.as_ref(), final_seed)?;
    let legacy_report = if stepper.is_deterministic() && config.stepper.kind == "legacy" {
        final_report.clone()
    } else {
        report_rollout(run, "rollout-legacy", &policy, &problem, legacy.as_ref(), 0)?
    };
    let summary = OptimizeSummary {
        algorithm: config.optimizer.algorithm.clone(),
        stepper: config.stepper.kind.clone(),
        initial_f: trace.initial_f,
        best_f: trace.best_f,
        eval_count: trace.eval_count,
        passes: trace.passes,
        budget_exhausted: trace.budget_exhausted,
        restart_cap_hit: trace.restart_cap_hit,
        final_report,
        legacy_report,
        noise_floor: noise,
        stages,
    };
    run.out.json("summary.json", &summary)?;
    println!(
        "best {:.6} after {} evaluations (start {:.6}); legacy objective {:.6}, terminal {:.6}",
        summary.best_f, summary.eval_count, summary.initial_f, summary.legacy_report.total, summary.legacy_report.w_part
    );
    Ok(())
}

fn evaluation_table(log: &[(usize, ObjectiveReport)], problem: &SwitchingProblem) -> CsvTable {
    let mut header = vec!["evaluation", "stage", "total", "q_part", "w_part", "feasible"];
    header.extend(coverage_columns(&problem.model));
    let mut table = CsvTable::new(header);
    for (i, (stage, r)) in log.iter().enumerate() {
        let mut row = vec![
            Cell::from(i),
            Cell::from(*stage),
            Cell::from(r.total),
            Cell::from(r.q_part),
            Cell::from(r.w_part),
            Cell::from(if r.feasible { "true" } else { "false" }),
        ];
        match &r.final_state {
            Some(x) => row.extend(x.as_slice().iter().map(|&v| Cell::from(v))),
            None => row.extend((0..problem.model.dim()).map(|_| Cell::from(""))),
        }
        table.push_row(row);
    }
    table
}
