//! Property tests over the public API.

use std::cell::Cell;

use coarse_switch::kmc::{lift, restrict, ssa_advance, ssa_run, EventTrace, NoTrace, RngSeed};
use coarse_switch::meanfield::{classify, find_steady_states, integrate_to, trace_separatrix, OdeOptions};
use coarse_switch::objective::{evaluate, running_cost, ChargeTime, DecayWeight, Policy, PolicyObjective, SeedMode, SwitchingProblem};
use coarse_switch::optim::{
    refine_timestep, Agreement, FnObjective, HookeJeeves, ImplicitFiltering, NelderMead, Objective, Optimizer,
    Restarting, SearchSpec,
};
use coarse_switch::stepper::{CoarseStepper, EnsembleConfig, KmcStepper, LegacyStepper};
use coarse_switch::{CoParams, CoarseState, Model, NoParams};
use proptest::prelude::*;

fn no(k: f64) -> Model {
    Model::No(NoParams { k, ..NoParams::reference() })
}

fn co(beta: f64) -> Model {
    Model::Co(CoParams { beta, ..CoParams::reference() })
}

fn simplex_point(a: f64, frac: f64) -> CoarseState {
    CoarseState::pair(a, frac * (1.0 - a))
}

fn optimizers() -> Vec<Box<dyn Optimizer>> {
    vec![
        Box::new(HookeJeeves),
        Box::new(ImplicitFiltering::default()),
        Box::new(NelderMead),
        Box::new(Restarting {
            inner: Box::new(HookeJeeves),
            agreement: Agreement::Relative(0.01),
            cap: 5,
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_roots_sum_to_two(k in 4.0f64..26.0) {
        let states = find_steady_states(&no(k)).unwrap();
        if states.len() == 3 {
            let sum: f64 = states.iter().map(|s| s.state.get(0)).sum();
            prop_assert!((sum - 2.0).abs() <= 1e-9, "k = {k}: sum {sum}");
        }
    }

    #[test]
    fn steady_states_are_stationary_and_classified(k in 0.5f64..40.0, beta in 0.5f64..8.0) {
        for model in [no(k), co(beta)] {
            for s in find_steady_states(&model).unwrap() {
                let r = model.rhs(&s.state).unwrap();
                let norm = r.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(norm < 1e-10, "{model:?} {s:?}: residual {norm:e}");
                prop_assert_eq!(classify(&s.eigenvalues), s.stability);
            }
        }
    }

    #[test]
    fn integration_stays_in_the_simplex(
        a in 0.0f64..1.0, frac in 0.0f64..1.0, control in 0.0f64..20.0, t in 0.01f64..20.0,
    ) {
        let x = integrate_to(&no(control), &CoarseState::scalar(a), t, &OdeOptions::default()).unwrap();
        prop_assert!(x.validate(1e-9).is_ok(), "{x:?}");
        let y = integrate_to(&co(control), &simplex_point(a, frac), t, &OdeOptions::default()).unwrap();
        prop_assert!(y.validate(1e-9).is_ok(), "{y:?}");
    }

    #[test]
    fn ssa_event_sequences_are_reproducible(a in 0.0f64..1.0, frac in 0.0f64..1.0, n in 1u64..400, seed: u64) {
        let model = Model::Co(CoParams::reference());
        let start = lift(&simplex_point(a, frac), n).unwrap();
        let run = || {
            let mut s = start;
            let mut trace = EventTrace::new(&model);
            ssa_advance(&mut s, &model, 0.5, &mut RngSeed::new(seed, 3).rng(), &mut trace).unwrap();
            (s, trace.into_table().render())
        };
        prop_assert_eq!(run(), run());
        prop_assert_eq!(ssa_run(&start, &model, 0.5, RngSeed::new(seed, 3)).unwrap(), run().0);
    }

    #[test]
    fn legacy_evaluation_is_deterministic(values in prop::collection::vec(0.0f64..20.0, 8)) {
        let problem = SwitchingProblem::bistable(Model::No(NoParams::reference())).unwrap();
        let stepper = LegacyStepper::new(problem.model, OdeOptions::default()).unwrap();
        let policy = Policy::new(problem.model.mechanism(), 0.25, problem.p_ss(), values).unwrap();
        let a = evaluate(&policy, &problem, &stepper, 1).unwrap();
        let b = evaluate(&policy, &problem, &stepper, 2).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn shifting_a_deviation_later_scales_by_the_weight_ratio(
        delta in 0.1f64..5.0, n in 2usize..20, interval in 0.05f64..1.0, end in any::<bool>(),
    ) {
        let decay = DecayWeight::default();
        let charge = if end { ChargeTime::IntervalEnd } else { ChargeTime::IntervalStart };
        let p_ss = 4.5;
        let mut first = vec![p_ss; n];
        first[0] += delta;
        let mut last = vec![p_ss; n];
        last[n - 1] += delta;
        let mech = Model::No(NoParams::reference()).mechanism();
        let q1 = running_cost(&Policy::new(mech, interval, p_ss, first).unwrap(), &decay, charge);
        let qn = running_cost(&Policy::new(mech, interval, p_ss, last).unwrap(), &decay, charge);
        let shift = usize::from(end) as f64;
        let expected = decay.at((n as f64 - 1.0 + shift) * interval) / decay.at(shift * interval);
        prop_assert!((qn / q1 - expected).abs() <= 1e-12 * expected, "{} vs {expected}", qn / q1);
        prop_assert!(qn > q1);
    }

    #[test]
    fn optimizers_are_monotone_and_honest(
        centre in prop::collection::vec(-3.0f64..3.0, 1..4), budget in 1usize..400,
    ) {
        for opt in optimizers() {
            let calls = Cell::new(0usize);
            let mut f = FnObjective(|x: &[f64]| {
                calls.set(calls.get() + 1);
                x.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum()
            });
            let spec = SearchSpec::new(vec![0.0; centre.len()], vec![1.0, 0.5, 0.25], budget);
            let t = opt.minimize(&spec, &mut f).unwrap();
            prop_assert_eq!(t.eval_count, calls.get(), "{}", opt.name());
            prop_assert!(t.eval_count <= budget);
            prop_assert!(t.best_f <= t.initial_f);
            let recorded: Vec<f64> = t.iterations.iter().map(|r| r.best_f).collect();
            prop_assert!(recorded.windows(2).all(|w| w[1] <= w[0]), "{}: {recorded:?}", opt.name());
        }
    }

    #[test]
    fn infeasible_points_never_become_incumbent(centre in prop::collection::vec(-6.0f64..6.0, 2)) {
        // the unconstrained minimum may lie outside the box [-2, 2]²
        for opt in optimizers() {
            let mut f = FnObjective(|x: &[f64]| {
                let violation: f64 = x.iter().map(|v| (v.abs() - 2.0).max(0.0)).sum();
                if violation > 0.0 {
                    1e6 * (1.0 + violation)
                } else {
                    x.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum()
                }
            });
            let t = opt.minimize(&SearchSpec::new(vec![0.0, 0.0], vec![1.0, 0.5, 0.25], 2000), &mut f).unwrap();
            prop_assert!(t.best_x.iter().all(|v| v.abs() <= 2.0), "{}: {:?}", opt.name(), t.best_x);
            prop_assert!(t.best_f < 1e6);
        }
    }

    #[test]
    fn refinement_preserves_horizon_and_box(
        values in prop::collection::vec(0.0f64..20.0, 1..12), factor in 1usize..6,
    ) {
        let n = values.len();
        let policy = Policy::new(Model::Co(CoParams::reference()).mechanism(), 0.5, 3.5, values).unwrap();
        let refined = refine_timestep(&policy, 0.5 / factor as f64, [0.0, 20.0]).unwrap();
        prop_assert_eq!(refined.intervals, n * factor);
        prop_assert!((refined.horizon() - policy.horizon()).abs() <= 1e-12);
        prop_assert!(refined.values.iter().all(|v| (0.0..=20.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn separatrix_side_predicts_the_attractor(a in 0.0f64..1.0, frac in 0.0f64..1.0) {
        let model = Model::Co(CoParams::reference());
        let sep = trace_separatrix(&model).unwrap();
        let x = simplex_point(a, frac);
        let p = [x.get(0), x.get(1)];
        prop_assume!(sep.distance(p) > 1e-3);
        let predicted = sep.predicted_attractor(p).expect("an attractor on each side").state;
        let end = integrate_to(&model, &x, 50.0, &OdeOptions::default()).unwrap();
        prop_assert!(end.max_abs_diff(&predicted) < 1e-3, "{p:?} ended at {end:?}, predicted {predicted:?}");
    }

    #[test]
    fn adaptive_steps_meet_their_postcondition(
        n in 50u64..1500, m in 2usize..12, grow in 1usize..5, d_exp in -4.0f64..-1.0,
        a in 0.0f64..1.0, frac in 0.0f64..1.0, control in 0.0f64..10.0, seed: u64,
    ) {
        let cfg = EnsembleConfig {
            n_sites: n,
            m_replicas: m,
            m_min: (m / 2).max(1),
            m_max: m * grow,
            d_max: Some(10f64.powf(d_exp)),
        };
        let stepper = KmcStepper::new(Model::Co(CoParams::reference()), cfg.clone()).unwrap();
        let r = stepper.step(&simplex_point(a, frac), control, 0.1, seed).unwrap();
        prop_assert!(r.max_d() <= cfg.d_max.unwrap() || r.m_used == cfg.m_max, "{r:?}");
        prop_assert!((cfg.m_min..=cfg.m_max).contains(&r.m_used));
        prop_assert!(r.mean.validate(1e-12).is_ok());
    }
}

/// Worst gap between the ensemble mean and the ODE on a 5-point grid, with the
/// standard error at that point.
fn mean_field_gap(n_sites: u64, replicas: u64) -> (f64, f64) {
    let model = Model::No(NoParams::reference());
    let x0 = CoarseState::scalar(0.3301);
    let times = [0.2, 0.4, 0.6, 0.8, 1.0];
    let paths: Vec<Vec<f64>> = (0..replicas)
        .map(|r| {
            let mut s = lift(&x0, n_sites).unwrap();
            let mut rng = RngSeed::new(17, r).rng();
            times
                .iter()
                .map(|&t| {
                    ssa_advance(&mut s, &model, t, &mut rng, &mut NoTrace).unwrap();
                    restrict(&s).get(0)
                })
                .collect()
        })
        .collect();
    let m = replicas as f64;
    let mut worst = (0.0, 0.0);
    for (k, &t) in times.iter().enumerate() {
        let mean = paths.iter().map(|p| p[k]).sum::<f64>() / m;
        let se = (paths.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
        let ode = integrate_to(&model, &x0, t, &OdeOptions::default()).unwrap().get(0);
        if (mean - ode).abs() > worst.0 {
            worst = ((mean - ode).abs(), se);
        }
    }
    worst
}

#[test]
fn ensemble_mean_converges_to_the_ode_with_lattice_size() {
    let gaps: Vec<(f64, f64)> = [50u64 * 50, 100 * 100, 200 * 200].iter().map(|&n| mean_field_gap(n, 200)).collect();
    for w in gaps.windows(2) {
        assert!(w[1].0 <= w[0].0 + 2.0 * w[0].1.hypot(w[1].1), "{gaps:?}");
    }
}

#[test]
fn spread_halves_when_the_lattice_quadruples() {
    let d_at = |n: u64| {
        let cfg = EnsembleConfig {
            n_sites: n,
            m_replicas: 400,
            m_min: 1,
            m_max: 400,
            d_max: None,
        };
        KmcStepper::new(Model::No(NoParams::reference()), cfg)
            .unwrap()
            .step(&CoarseState::scalar(0.3301), 4.5, 0.25, 5)
            .unwrap()
            .d[0]
    };
    let ratio = d_at(10_000) / d_at(2_500);
    assert!((ratio / 0.5 - 1.0).abs() <= 0.25, "ratio {ratio}");
}

#[test]
fn thread_count_does_not_change_step_results() {
    let stepper = KmcStepper::new(
        Model::No(NoParams::reference()),
        EnsembleConfig {
            n_sites: 900,
            m_replicas: 16,
            m_min: 4,
            m_max: 64,
            d_max: Some(0.003),
        },
    )
    .unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| (0..8).map(|s| stepper.step(&CoarseState::scalar(0.5), 6.0, 0.2, s).unwrap()).collect::<Vec<_>>())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn optimizers_run_unchanged_against_either_stepper() {
    let problem = SwitchingProblem::bistable(Model::No(NoParams::reference())).unwrap();
    let legacy = LegacyStepper::new(problem.model, OdeOptions::default()).unwrap();
    let kmc = KmcStepper::new(
        problem.model,
        EnsembleConfig {
            n_sites: 400,
            m_replicas: 8,
            m_min: 4,
            m_max: 8,
            d_max: None,
        },
    )
    .unwrap();
    let steppers: [&dyn CoarseStepper; 2] = [&legacy, &kmc];
    let template = Policy::constant(problem.model.mechanism(), 0.25, 4, problem.p_ss()).unwrap();
    for stepper in steppers {
        for opt in optimizers() {
            let mut obj = PolicyObjective::new(&problem, stepper, template.clone(), 9, SeedMode::Fresh).unwrap();
            let spec = SearchSpec::new(template.values.clone(), vec![1.0, 0.5], 30);
            let t = opt.minimize(&spec, &mut obj).unwrap();
            assert!(t.best_f <= t.initial_f);
            assert_eq!(t.eval_count as u64, obj.evaluations());
            assert!(obj.evaluate(&t.best_x).unwrap().is_finite());
        }
    }
}

#[test]
fn constant_nominal_policy_has_no_running_cost() {
    for model in [Model::No(NoParams::reference()), Model::Co(CoParams::reference())] {
        let problem = SwitchingProblem::bistable(model).unwrap();
        let stepper = LegacyStepper::new(model, OdeOptions::default()).unwrap();
        let policy = Policy::constant(model.mechanism(), 0.5, 6, problem.p_ss()).unwrap();
        let r = evaluate(&policy, &problem, &stepper, 0).unwrap();
        assert_eq!(r.q_part, 0.0);
        assert_eq!(r.total, r.w_part);
    }
}
