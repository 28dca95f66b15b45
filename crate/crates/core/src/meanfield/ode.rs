//! Adaptive Dormand–Prince 5(4) integration of the mean-field models.

use serde::{Deserialize, Serialize};

use super::{CoarseState, Model, DOMAIN_TOL};
use crate::error::{Error, Result};
use crate::table::{Cell, CsvTable};

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Accepted plus rejected steps allowed per call.
    pub max_steps: usize,
    /// Largest step; `null` in JSON means unbounded.
    #[serde(with = "unbounded")]
    #[cfg_attr(feature = "schema", schemars(with = "Option<f64>"))]
    pub h_max: f64,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_some(x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            max_steps: 1_000_000,
            h_max: f64::INFINITY,
        }
    }
}

// Stage times are omitted: both vector fields are autonomous.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th- and 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

#[inline]
fn axpy(y: &[f64; 2], h: f64, terms: &[(f64, &[f64; 2])]) -> [f64; 2] {
    let mut out = *y;
    for i in 0..2 {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Embedded RK5(4) stepper with FSAL and elementary step-size control, working
/// on inline two-slot state storage (only the first `dim` slots are used).
pub struct Dopri5<F> {
    f: F,
    dim: usize,
    t: f64,
    y: [f64; 2],
    k1: [f64; 2],
    h: f64,
    opts: OdeOptions,
    steps: usize,
}

impl<F> Dopri5<F>
where
    F: Fn(&[f64; 2]) -> [f64; 2],
{
    pub fn new(f: F, dim: usize, t0: f64, y0: [f64; 2], opts: OdeOptions) -> Self {
        let k1 = f(&y0);
        let mut s = Self {
            f,
            dim,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            opts,
            steps: 0,
        };
        s.h = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> [f64; 2] {
        self.y
    }

    pub fn set_h_max(&mut self, h_max: f64) {
        self.opts.h_max = h_max;
        self.h = self.h.min(h_max);
    }

    /// Derivative at the current point.
    pub fn derivative(&self) -> [f64; 2] {
        self.k1
    }

    fn norm(&self, v: &[f64; 2], scale_from: &[f64; 2]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let sc = self.opts.atol + self.opts.rtol * scale_from[i].abs();
            acc += (v[i] / sc).powi(2);
        }
        (acc / self.dim as f64).sqrt()
    }

    fn initial_step(&self) -> f64 {
        let d0 = self.norm(&self.y, &self.y);
        let d1 = self.norm(&self.k1, &self.y);
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h.min(self.opts.h_max)
    }

    /// Takes one accepted step without passing `t_end`.
    pub fn step_towards(&mut self, t_end: f64) -> Result<()> {
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::TooManySteps {
                    t: self.t,
                    max_steps: self.opts.max_steps,
                });
            }
            self.steps += 1;
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let h_min = 16.0 * f64::EPSILON * self.t.abs().max(1.0);
            if h < h_min && !last {
                return Err(Error::StepUnderflow { t: self.t, h });
            }

            let f = &self.f;
            let y = &self.y;
            let k1 = self.k1;
            let k2 = f(&axpy(y, h, &[(A21, &k1)]));
            let k3 = f(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(&axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(&axpy(
                y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ));
            let y_new = axpy(
                y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = f(&y_new);
            let err_vec = axpy(
                &[0.0; 2],
                h,
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            );
            let scale_from = [y[0].abs().max(y_new[0].abs()), y[1].abs().max(y_new[1].abs())];
            let err = self.norm(&err_vec, &scale_from);

            if !err.is_finite() {
                self.h = h * FAC_MIN;
                continue;
            }
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                self.k1 = k7;
                // keep the controller's proposal even after a clipped final step
                self.h = (self.h.max(h) * fac).min(self.opts.h_max);
                return Ok(());
            }
            self.h = h * fac.min(1.0);
            if self.h < h_min {
                return Err(Error::StepUnderflow { t: self.t, h: self.h });
            }
        }
    }

    /// Integrates up to exactly `t_end`.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step_towards(t_end)?;
        }
        Ok(())
    }
}

/// Sampled solution of an initial-value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CoarseState>,
}

impl Trajectory {
    pub fn final_state(&self) -> CoarseState {
        *self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `t` followed by the model's coverage names.
    pub fn to_csv(&self, model: &Model) -> CsvTable {
        let mut header = vec!["t".to_owned()];
        header.extend(coverage_columns(model).iter().map(|s| s.to_string()));
        let mut table = CsvTable::new(header);
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![Cell::from(*t)];
            row.extend(x.as_slice().iter().map(|&v| Cell::from(v)));
            table.push_row(row);
        }
        table
    }
}

pub fn coverage_columns(model: &Model) -> &'static [&'static str] {
    match model.dim() {
        1 => &["theta"],
        _ => &["theta_a", "theta_b"],
    }
}

fn check_inputs(model: &Model, x0: &CoarseState, t_span: f64) -> Result<()> {
    model.check_dim(x0)?;
    x0.validate(DOMAIN_TOL)?;
    if !(t_span.is_finite() && t_span >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "integration span must be finite and non-negative, got {t_span}"
        )));
    }
    Ok(())
}

fn stepper(model: &Model, x0: &CoarseState, opts: &OdeOptions) -> Dopri5<impl Fn(&[f64; 2]) -> [f64; 2]> {
    let m = *model;
    Dopri5::new(move |y| m.field(y), model.dim(), 0.0, x0.raw(), *opts)
}

/// State after evolving `x0` for `t_span` under `model`.
pub fn integrate_to(model: &Model, x0: &CoarseState, t_span: f64, opts: &OdeOptions) -> Result<CoarseState> {
    check_inputs(model, x0, t_span)?;
    if t_span == 0.0 {
        return Ok(*x0);
    }
    let mut s = stepper(model, x0, opts);
    s.advance_to(t_span)?;
    Ok(CoarseState::from_raw(s.y(), model.dim()))
}

/// Trajectory recorded at every accepted step.
pub fn integrate(model: &Model, x0: &CoarseState, t_span: f64, opts: &OdeOptions) -> Result<Trajectory> {
    check_inputs(model, x0, t_span)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![*x0],
    };
    if t_span == 0.0 {
        return Ok(traj);
    }
    let mut s = stepper(model, x0, opts);
    while s.t() < t_span {
        s.step_towards(t_span)?;
        traj.times.push(s.t());
        traj.states.push(CoarseState::from_raw(s.y(), model.dim()));
    }
    Ok(traj)
}

/// Trajectory sampled at `0, dt, 2dt, …` plus the end point `t_span`.
pub fn integrate_sampled(
    model: &Model,
    x0: &CoarseState,
    t_span: f64,
    dt: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    check_inputs(model, x0, t_span)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("sample interval must be positive, got {dt}")));
    }
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![*x0],
    };
    let mut s = stepper(model, x0, opts);
    for t in sample_times(t_span, dt).into_iter().skip(1) {
        s.advance_to(t)?;
        traj.times.push(t);
        traj.states.push(CoarseState::from_raw(s.y(), model.dim()));
    }
    Ok(traj)
}

/// `0, dt, 2dt, …` up to `t_end`, with `t_end` itself always last.
pub(crate) fn sample_times(t_end: f64, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut i = 1u64;
    loop {
        let t = i as f64 * dt;
        if t >= t_end * (1.0 - 1e-12) {
            break;
        }
        out.push(t);
        i += 1;
    }
    if t_end > 0.0 {
        out.push(t_end);
    }
    out
}
