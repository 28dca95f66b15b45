use crate::error::{Error, Result};
use crate::objective::Policy;

/// Interpolating cubic spline with zero second derivative at both ends,
/// continued linearly outside the knot range.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalCubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(t: &[f64], y: &[f64]) -> Result<Self> {
        if t.is_empty() || t.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "spline needs matching nonempty knots and values ({} vs {})",
                t.len(),
                y.len()
            )));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("spline knots must be strictly increasing".into()));
        }
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives
            let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    fn end_slope(&self, i: usize) -> f64 {
        let n = self.t.len();
        if n == 1 {
            return 0.0;
        }
        if i == 0 {
            let h = self.t[1] - self.t[0];
            (self.y[1] - self.y[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0
        } else {
            let h = self.t[n - 1] - self.t[n - 2];
            (self.y[n - 1] - self.y[n - 2]) / h + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            return self.y[0] + self.end_slope(0) * (x - self.t[0]);
        }
        if x >= self.t[n - 1] {
            return self.y[n - 1] + self.end_slope(n - 1) * (x - self.t[n - 1]);
        }
        let i = self.t.partition_point(|&k| k <= x) - 1;
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Resamples `policy` on intervals of length `new_interval` over the same
/// horizon: a natural cubic spline through the old interval midpoints is read
/// at the new midpoints and clipped to `param_box`.
pub fn refine_timestep(policy: &Policy, new_interval: f64, param_box: [f64; 2]) -> Result<Policy> {
    policy.validate()?;
    if !(new_interval > 0.0 && new_interval <= policy.interval) {
        return Err(Error::InvalidArgument(format!(
            "new interval {new_interval} must be positive and no longer than {}",
            policy.interval
        )));
    }
    let horizon = policy.horizon();
    let count = (horizon / new_interval).round();
    if count < 1.0 || (count * new_interval - horizon).abs() > 1e-9 {
        return Err(Error::IncompatibleHorizon {
            horizon,
            interval: new_interval,
        });
    }
    let spline = NaturalCubicSpline::new(&policy.midpoints(), &policy.values)?;
    let [lo, hi] = param_box;
    let values = (0..count as usize)
        .map(|i| spline.eval((i as f64 + 0.5) * new_interval).clamp(lo, hi))
        .collect();
    let mut refined = Policy::new(policy.mechanism, new_interval, policy.p_ss, values)?;
    refined.seed = policy.seed;
    Ok(refined)
}
