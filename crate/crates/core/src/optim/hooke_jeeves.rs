use super::{axpy, Evaluator, Objective, Optimizer, SearchSpec, SearchTrace};
use crate::error::Result;

/// Pattern search: coordinate probes at the current scale, then a doubled
/// pattern move along the net displacement.
///
/// Probes are compared against the running incumbent. A sweep that improves
/// nothing drops to the next scale; the search ends when the ladder is
/// exhausted or the budget is spent.
#[derive(Debug, Clone, Copy, Default)]
pub struct HookeJeeves;

impl Optimizer for HookeJeeves {
    fn name(&self) -> &'static str {
        "hooke-jeeves"
    }

    fn minimize(&self, spec: &SearchSpec, f: &mut dyn Objective) -> Result<SearchTrace> {
        spec.validate()?;
        let dirs = spec.directions();
        let (mut ev, f_start) = Evaluator::start(f, &spec.x0, spec.max_evals)?;
        let mut x0 = spec.x0.clone();
        let mut f0 = f_start;
        let mut i = 0;
        let mut iteration = 0;
        'search: while i < spec.scales.len() {
            let s = spec.scales[i];
            iteration += 1;
            let mut xs = x0.clone();
            let mut fs = f0;
            let mut accepted = 0;
            for v in &dirs {
                for sign in [1.0, -1.0] {
                    let probe = axpy(&xs, sign * s, v);
                    let Some(fp) = ev.eval(&probe)? else {
                        ev.record(iteration, s, accepted, 0);
                        break 'search;
                    };
                    if fp < fs {
                        xs = probe;
                        fs = fp;
                        accepted += 1;
                        break;
                    }
                }
            }
            if xs == x0 {
                ev.record(iteration, s, accepted, 0);
                i += 1;
                continue;
            }
            let xc: Vec<f64> = x0.iter().zip(&xs).map(|(a, b)| a + 2.0 * (b - a)).collect();
            let mut pattern = 0;
            match ev.eval(&xc)? {
                Some(fc) if fc < fs => {
                    xs = xc;
                    fs = fc;
                    pattern = 1;
                }
                Some(_) => {}
                None => {
                    ev.record(iteration, s, accepted, 0);
                    break;
                }
            }
            x0 = xs;
            f0 = fs;
            ev.record(iteration, s, accepted, pattern);
        }
        debug_assert!(ev.best_f() <= f0);
        Ok(ev.finish())
    }
}
