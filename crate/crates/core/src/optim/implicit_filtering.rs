use super::{axpy, Evaluator, Objective, Optimizer, SearchSpec, SearchTrace};
use crate::error::Result;

/// Steepest descent on central-difference gradients whose stencil width is
/// the current scale.
///
/// Each step is capped to a maximum change of one scale per coordinate and
/// shortened by halving until it improves on the incumbent; if it never does,
/// the best stencil point is taken instead. A stencil with no improving point
/// moves the search to the next scale.
#[derive(Debug, Clone, Copy)]
pub struct ImplicitFiltering {
    pub max_backtracks: usize,
    pub max_iterations_per_scale: usize,
}

impl Default for ImplicitFiltering {
    fn default() -> Self {
        Self {
            max_backtracks: 3,
            max_iterations_per_scale: 100,
        }
    }
}

/// Components `(f(x + h v_j) − f(x − h v_j)) / 2h` along each direction.
pub fn central_difference_gradient(
    f: &mut dyn Objective,
    x: &[f64],
    h: f64,
    directions: &[Vec<f64>],
) -> Result<Vec<f64>> {
    directions
        .iter()
        .map(|v| Ok((f.evaluate(&axpy(x, h, v))? - f.evaluate(&axpy(x, -h, v))?) / (2.0 * h)))
        .collect()
}

impl Optimizer for ImplicitFiltering {
    fn name(&self) -> &'static str {
        "implicit-filtering"
    }

    fn minimize(&self, spec: &SearchSpec, f: &mut dyn Objective) -> Result<SearchTrace> {
        spec.validate()?;
        let dirs = spec.directions();
        let n = spec.x0.len();
        let (mut ev, f_start) = Evaluator::start(f, &spec.x0, spec.max_evals)?;
        let mut x = spec.x0.clone();
        let mut fx = f_start;
        let mut iteration = 0;
        'scales: for &h in &spec.scales {
            for _ in 0..self.max_iterations_per_scale {
                iteration += 1;
                let mut grad = vec![0.0; n];
                let mut best_stencil: Option<(Vec<f64>, f64)> = None;
                for (g, v) in grad.iter_mut().zip(&dirs) {
                    let xp = axpy(&x, h, v);
                    let xm = axpy(&x, -h, v);
                    let (Some(fp), Some(fm)) = (ev.eval(&xp)?, ev.eval(&xm)?) else {
                        ev.record(iteration, h, 0, 0);
                        break 'scales;
                    };
                    *g = (fp - fm) / (2.0 * h);
                    for (p, fv) in [(xp, fp), (xm, fm)] {
                        if best_stencil.as_ref().is_none_or(|(_, b)| fv < *b) {
                            best_stencil = Some((p, fv));
                        }
                    }
                }
                let (stencil_x, stencil_f) = best_stencil.expect("at least one direction");
                if stencil_f >= fx {
                    ev.record(iteration, h, 0, 0);
                    continue 'scales;
                }
                let mut step = vec![0.0; n];
                for (g, v) in grad.iter().zip(&dirs) {
                    step.iter_mut().zip(v).for_each(|(s, vi)| *s -= g * vi);
                }
                let largest = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
                if largest > h {
                    step.iter_mut().for_each(|s| *s *= h / largest);
                }
                let mut moved = false;
                let mut lambda = 1.0;
                for _ in 0..=self.max_backtracks {
                    let trial = axpy(&x, lambda, &step);
                    let Some(ft) = ev.eval(&trial)? else {
                        break;
                    };
                    if ft < fx {
                        x = trial;
                        fx = ft;
                        moved = true;
                        break;
                    }
                    lambda *= 0.5;
                }
                if !moved {
                    x = stencil_x;
                    fx = stencil_f;
                }
                ev.record(iteration, h, 1, 0);
                if ev.budget_spent() {
                    break 'scales;
                }
            }
        }
        Ok(ev.finish())
    }
}
