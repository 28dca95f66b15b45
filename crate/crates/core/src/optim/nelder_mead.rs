use super::{axpy, Evaluator, Objective, Optimizer, SearchSpec, SearchTrace};
use crate::error::Result;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Downhill simplex with reflection 1, expansion 2, contraction ½ and shrink ½.
///
/// The initial simplex spans the largest scale along each direction; the
/// search stops once every vertex lies within the smallest scale of the best
/// one, or when the budget is spent.
#[derive(Debug, Clone, Copy, Default)]
pub struct NelderMead;

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex
        .iter()
        .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

impl Optimizer for NelderMead {
    fn name(&self) -> &'static str {
        "nelder-mead"
    }

    fn minimize(&self, spec: &SearchSpec, f: &mut dyn Objective) -> Result<SearchTrace> {
        spec.validate()?;
        let n = spec.x0.len();
        let (mut ev, f0) = Evaluator::start(f, &spec.x0, spec.max_evals)?;
        let mut simplex = vec![(spec.x0.clone(), f0)];
        for v in spec.directions() {
            let x = axpy(&spec.x0, spec.scales[0], &v);
            match ev.eval(&x)? {
                Some(fx) => simplex.push((x, fx)),
                None => return Ok(ev.finish()),
            }
        }
        let tol = spec.smallest_scale();
        let mut iteration = 0;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if diameter(&simplex) < tol {
                break;
            }
            iteration += 1;
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                centroid.iter_mut().zip(x).for_each(|(c, xi)| *c += xi / n as f64);
            }
            let (worst, f_worst) = simplex[n].clone();
            let toward = |a: f64| -> Vec<f64> {
                centroid.iter().zip(&worst).map(|(c, w)| c + a * (c - w)).collect()
            };
            let f_best = simplex[0].1;
            let f_second = simplex[n - 1].1;
            let xr = toward(REFLECT);
            let Some(fr) = ev.eval(&xr)? else { break };
            let mut replacement = None;
            if fr < f_best {
                let xe = toward(REFLECT * EXPAND);
                let Some(fe) = ev.eval(&xe)? else { break };
                replacement = Some(if fe < fr { (xe, fe) } else { (xr, fr) });
            } else if fr < f_second {
                replacement = Some((xr, fr));
            } else if fr < f_worst {
                let xc = toward(REFLECT * CONTRACT);
                let Some(fc) = ev.eval(&xc)? else { break };
                if fc <= fr {
                    replacement = Some((xc, fc));
                }
            } else {
                let xc = toward(-CONTRACT);
                let Some(fc) = ev.eval(&xc)? else { break };
                if fc < f_worst {
                    replacement = Some((xc, fc));
                }
            }
            let accepted = match replacement {
                Some(vertex) => {
                    simplex[n] = vertex;
                    1
                }
                None => {
                    let best = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + SHRINK * (v - b)).collect();
                        let Some(fx) = ev.eval(&x)? else {
                            ev.record(iteration, diameter(&simplex), 0, 0);
                            return Ok(ev.finish());
                        };
                        *vertex = (x, fx);
                    }
                    0
                }
            };
            ev.record(iteration, diameter(&simplex), accepted, 0);
        }
        Ok(ev.finish())
    }
}
