//! Stable manifold of the CO saddle, the boundary between the two basins.

use serde::{Deserialize, Serialize};

use super::ode::{Dopri5, OdeOptions};
use super::steady::{find_steady_states, Stability, SteadyState};
use super::Model;
use crate::error::{Error, Result};
use crate::table::{Cell, CsvTable};

/// Offset from the saddle along the unit stable eigenvector.
pub const SEED_OFFSET: f64 = 1e-6;
/// Each branch stops once its arc length exceeds this.
pub const MAX_ARC_LENGTH: f64 = 10.0;
const MAX_REVERSE_TIME: f64 = 1e3;
const MAX_SEGMENT: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    pub saddle: SteadyState,
    /// Stable states, ordered by `θ_A`.
    pub attractors: Vec<SteadyState>,
    /// Polyline through the saddle, from one end of the manifold to the other.
    pub points: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segment_closest(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - q[0]).hypot(p[1] - q[1]), t)
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

impl Separatrix {
    /// Euclidean distance from `p` to the polyline.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        self.points
            .windows(2)
            .map(|w| segment_closest(p, w[0], w[1]).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Side of the polyline on which `p` lies, judged at the nearest segment.
    /// Beyond either end the end segment is extended as a ray.
    pub fn side(&self, p: [f64; 2]) -> Side {
        let n = self.points.len();
        let mut best = (f64::INFINITY, 0usize);
        for i in 0..n - 1 {
            let (dist, _) = segment_closest(p, self.points[i], self.points[i + 1]);
            if dist < best.0 {
                best = (dist, i);
            }
        }
        let i = best.1;
        let c = cross(self.points[i], self.points[i + 1], p);
        if c >= 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    /// The attractor whose basin contains `p`, as predicted by [`Self::side`].
    pub fn predicted_attractor(&self, p: [f64; 2]) -> Option<&SteadyState> {
        let side = self.side(p);
        self.attractors.iter().find(|a| {
            let s = a.state;
            self.side([s.get(0), s.get(1)]) == side
        })
    }

    /// Whether the piecewise-linear `path` crosses the separatrix.
    pub fn crossed_by(&self, path: &[[f64; 2]]) -> bool {
        path.windows(2).any(|seg| {
            self.points
                .windows(2)
                .any(|sep| segments_intersect(seg[0], seg[1], sep[0], sep[1]))
        })
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["index", "theta_a", "theta_b"]);
        for (i, p) in self.points.iter().enumerate() {
            t.push_row([Cell::from(i), Cell::from(p[0]), Cell::from(p[1])]);
        }
        t
    }
}

fn in_simplex(y: &[f64; 2]) -> bool {
    y[0] >= 0.0 && y[1] >= 0.0 && y[0] + y[1] <= 1.0
}

/// Integrates the time-reversed field from `start` until the branch leaves
/// the coverage simplex, stalls, or exceeds [`MAX_ARC_LENGTH`].
fn reverse_branch(model: &Model, start: [f64; 2]) -> Result<Vec<[f64; 2]>> {
    let m = *model;
    let mut s = Dopri5::new(
        move |y| {
            let f = m.field(y);
            [-f[0], -f[1]]
        },
        2,
        0.0,
        start,
        OdeOptions::default(),
    );
    let mut points = vec![start];
    let mut arc = 0.0;
    let mut last = start;
    while s.t() < MAX_REVERSE_TIME && arc <= MAX_ARC_LENGTH {
        let f = s.derivative();
        let speed = f[0].hypot(f[1]);
        if speed < 1e-12 {
            break;
        }
        // bound the segment length so side tests see a fine polyline
        s.set_h_max(MAX_SEGMENT / speed);
        s.step_towards(MAX_REVERSE_TIME)?;
        let y = s.y();
        if !in_simplex(&y) {
            points.push(clip_to_simplex(last, y));
            break;
        }
        arc += (y[0] - last[0]).hypot(y[1] - last[1]);
        points.push(y);
        last = y;
    }
    Ok(points)
}

/// Point where the segment `inside → outside` meets the simplex boundary.
fn clip_to_simplex(inside: [f64; 2], outside: [f64; 2]) -> [f64; 2] {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let p = [
            inside[0] + mid * (outside[0] - inside[0]),
            inside[1] + mid * (outside[1] - inside[1]),
        ];
        if in_simplex(&p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    [
        inside[0] + lo * (outside[0] - inside[0]),
        inside[1] + lo * (outside[1] - inside[1]),
    ]
}

/// Unit eigenvector of the 2×2 matrix `j` for the real eigenvalue `lambda`.
fn eigenvector(j: &[[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    let c1 = [j[0][1], lambda - j[0][0]];
    let c2 = [lambda - j[1][1], j[1][0]];
    let v = if c1[0].hypot(c1[1]) >= c2[0].hypot(c2[1]) { c1 } else { c2 };
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Traces the saddle's stable manifold by shooting the reversed flow from
/// `saddle ± SEED_OFFSET·v_s`.
pub fn trace_separatrix(model: &Model) -> Result<Separatrix> {
    if model.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            found: model.dim(),
        });
    }
    let states = find_steady_states(model)?;
    if let Some(m) = states.iter().find(|s| s.stability == Stability::Marginal) {
        return Err(Error::MarginalStability {
            state: m.state.as_slice().to_vec(),
        });
    }
    let Some(saddle) = states.iter().find(|s| s.stability == Stability::Saddle).cloned() else {
        return Err(Error::NoSaddle { found: states.len() });
    };
    if states.len() < 3 {
        return Err(Error::NoSaddle { found: states.len() });
    }
    let x = saddle.state;
    let j = model.jacobian(&x);
    let lambda_s = saddle.eigenvalues[0];
    let v = eigenvector(&j, lambda_s);
    let base = [x.get(0), x.get(1)];
    let plus = reverse_branch(model, [base[0] + SEED_OFFSET * v[0], base[1] + SEED_OFFSET * v[1]])?;
    let minus = reverse_branch(model, [base[0] - SEED_OFFSET * v[0], base[1] - SEED_OFFSET * v[1]])?;
    let mut points: Vec<[f64; 2]> = minus.into_iter().rev().collect();
    points.push(base);
    points.extend(plus);
    let attractors = states
        .into_iter()
        .filter(|s| s.stability == Stability::Stable)
        .collect();
    Ok(Separatrix {
        saddle,
        attractors,
        points,
    })
}
