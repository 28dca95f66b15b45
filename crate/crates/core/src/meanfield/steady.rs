//! Steady states of the mean-field models and their linear stability.
//!
//! NO: the steady-state condition is the cubic
//! `kθ³ − 2kθ² + (k+α+γ)θ − α = 0`, solved in closed form and polished by
//! Newton iterations. CO: Newton iterations seeded from a 21×21 grid over the
//! coverage simplex, deflating every root already found so that each seed is
//! pushed towards a new one.

use serde::{Deserialize, Serialize};

use super::{CoarseState, Model, NoParams};
use crate::error::Result;

/// Real parts within this band of zero are reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-8;
/// Largest accepted `‖F(x)‖∞` at a reported steady state.
pub const RESIDUAL_TOL: f64 = 1e-10;

const NEWTON_STEP_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
const GRID: usize = 20;
const SIMPLEX_TOL: f64 = 1e-9;
const SAME_ROOT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    /// All real parts positive (unstable node or focus; the middle NO state).
    UnstableNodeOrFocus,
    Saddle,
    /// Some real part within [`MARGINAL_TOL`] of zero.
    Marginal,
}

impl Stability {
    pub fn label(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::UnstableNodeOrFocus => "unstable",
            Stability::Saddle => "saddle",
            Stability::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub state: CoarseState,
    pub stability: Stability,
    /// Real parts of the Jacobian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

/// Classifies a steady state from the real parts of its spectrum.
pub fn classify(real_parts: &[f64]) -> Stability {
    if real_parts.iter().any(|r| r.abs() <= MARGINAL_TOL) {
        Stability::Marginal
    } else if real_parts.iter().all(|&r| r < 0.0) {
        Stability::Stable
    } else if real_parts.iter().all(|&r| r > 0.0) {
        Stability::UnstableNodeOrFocus
    } else {
        Stability::Saddle
    }
}

/// Real parts of the eigenvalues of the leading `dim × dim` block of `j`.
pub(crate) fn eigen_real_parts(j: &[[f64; 2]; 2], dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![j[0][0]];
    }
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // stable form avoids cancellation for the smaller-magnitude root
        let q = 0.5 * (tr + tr.signum() * s);
        let (l1, l2) = if q == 0.0 { (0.0, 0.0) } else { (q, det / q) };
        let mut v = vec![l1, l2];
        v.sort_by(f64::total_cmp);
        v
    } else {
        vec![0.5 * tr, 0.5 * tr]
    }
}

fn steady_state(model: &Model, x: CoarseState) -> SteadyState {
    let eigenvalues = eigen_real_parts(&model.jacobian(&x), model.dim());
    SteadyState {
        state: x,
        stability: classify(&eigenvalues),
        eigenvalues,
    }
}

/// All steady states with at least one vacant site fraction, sorted by the
/// first coverage.
///
/// Fully covered fixed points (the O-poisoned corner `(0, 1)` of CO, or `θ = 1`
/// for NO with `γ = 0`) are inert surfaces, not operating points, and are
/// left out.
pub fn find_steady_states(model: &Model) -> Result<Vec<SteadyState>> {
    model.validate()?;
    let mut roots = match model {
        Model::No(p) => no_roots(p)
            .into_iter()
            .map(CoarseState::scalar)
            .collect::<Vec<_>>(),
        Model::Co(_) => co_roots(model),
    };
    roots.retain(|x| 1.0 - x.as_slice().iter().sum::<f64>() > SIMPLEX_TOL);
    roots.sort_by(|a, b| a.get(0).total_cmp(&b.get(0)));
    Ok(roots.into_iter().map(|x| steady_state(model, x)).collect())
}

/// Real roots of `a x³ + b x² + c x + d` with `a ≠ 0`, ascending.
pub(crate) fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / (3.0 * a);
    let p = (3.0 * a * c - b * b) / (3.0 * a * a);
    let q = (2.0 * b * b * b - 9.0 * a * b * c + 27.0 * a * a * d) / (27.0 * a * a * a);
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let mut roots = if disc > 0.0 {
        // three distinct real roots: trigonometric form
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect::<Vec<_>>()
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt() - shift]
    };
    let poly = |x: f64| ((a * x + b) * x + c) * x + d;
    let dpoly = |x: f64| (3.0 * a * x + 2.0 * b) * x + c;
    for r in &mut roots {
        for _ in 0..4 {
            let dv = dpoly(*r);
            if dv == 0.0 {
                break;
            }
            let step = poly(*r) / dv;
            *r -= step;
            if step.abs() <= 1e-16 * r.abs().max(1.0) {
                break;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() < SAME_ROOT_TOL);
    roots
}

fn no_roots(p: &NoParams) -> Vec<f64> {
    let linear = p.alpha + p.gamma;
    let roots = if p.k == 0.0 {
        if linear == 0.0 {
            // every coverage is stationary; no isolated steady states
            return Vec::new();
        }
        vec![p.alpha / linear]
    } else {
        real_cubic_roots(p.k, -2.0 * p.k, p.k + linear, -p.alpha)
    };
    roots
        .into_iter()
        .filter(|r| (-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(r))
        .map(|r| r.clamp(0.0, 1.0))
        .collect()
}

fn solve2(j: &[[f64; 2]; 2], rhs: [f64; 2]) -> Option<[f64; 2]> {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (rhs[0] * j[1][1] - j[0][1] * rhs[1]) / det,
        (j[0][0] * rhs[1] - rhs[0] * j[1][0]) / det,
    ])
}

/// Newton on the deflated system `m(x)·F(x)` with
/// `m(x) = Π_r (1/‖x−r‖² + 1)` over previously found roots `r`.
fn deflated_newton(model: &Model, seed: [f64; 2], known: &[[f64; 2]]) -> Option<[f64; 2]> {
    let mut x = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let f = model.field(&x);
        let jf = model.jacobian_raw(&x);
        let mut grad_log_m = [0.0; 2];
        for r in known {
            let dx = [x[0] - r[0], x[1] - r[1]];
            let d2 = dx[0] * dx[0] + dx[1] * dx[1];
            if d2 == 0.0 {
                return None;
            }
            let g = 1.0 / d2 + 1.0;
            // ∇g / g
            let c = -2.0 / (d2 * d2 * g);
            grad_log_m[0] += c * dx[0];
            grad_log_m[1] += c * dx[1];
        }
        // J_G = m (J_F + F ⊗ ∇log m); the common factor m cancels in the step
        let jg = [
            [jf[0][0] + f[0] * grad_log_m[0], jf[0][1] + f[0] * grad_log_m[1]],
            [jf[1][0] + f[1] * grad_log_m[0], jf[1][1] + f[1] * grad_log_m[1]],
        ];
        let delta = solve2(&jg, [-f[0], -f[1]])?;
        x = [x[0] + delta[0], x[1] + delta[1]];
        if !(x[0].is_finite() && x[1].is_finite()) || x[0].abs() > 1e3 || x[1].abs() > 1e3 {
            return None;
        }
        if delta[0].hypot(delta[1]) < NEWTON_STEP_TOL {
            return Some(x);
        }
    }
    None
}

fn polish(model: &Model, mut x: [f64; 2]) -> [f64; 2] {
    for _ in 0..5 {
        let f = model.field(&x);
        match solve2(&model.jacobian_raw(&x), [-f[0], -f[1]]) {
            Some(d) => {
                x = [x[0] + d[0], x[1] + d[1]];
                if d[0].hypot(d[1]) < 1e-15 {
                    break;
                }
            }
            None => break,
        }
    }
    x
}

fn co_roots(model: &Model) -> Vec<CoarseState> {
    let mut known: Vec<[f64; 2]> = Vec::new();
    let mut inside = Vec::new();
    for i in 0..=GRID {
        for j in 0..=(GRID - i) {
            let seed = [i as f64 / GRID as f64, j as f64 / GRID as f64];
            let Some(root) = deflated_newton(model, seed, &known) else {
                continue;
            };
            let root = polish(model, root);
            let f = model.field(&root);
            if f[0].abs().max(f[1].abs()) >= RESIDUAL_TOL {
                continue;
            }
            if known
                .iter()
                .any(|r| (r[0] - root[0]).hypot(r[1] - root[1]) < SAME_ROOT_TOL)
            {
                continue;
            }
            known.push(root);
            let in_simplex = root[0] >= -SIMPLEX_TOL
                && root[1] >= -SIMPLEX_TOL
                && root[0] + root[1] <= 1.0 + SIMPLEX_TOL;
            if in_simplex {
                inside.push(CoarseState::pair(root[0].max(0.0), root[1].max(0.0)));
            }
        }
    }
    inside
}
