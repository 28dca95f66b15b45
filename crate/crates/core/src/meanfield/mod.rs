//! Mean-field ODE models of the two surface mechanisms.
//!
//! * NO reduction: one coverage `θ` with Langmuir adsorption, first-order
//!   desorption and a reaction that needs two vacant neighbours,
//!   `dθ/dt = α(1−θ) − γθ − k(1−θ)²θ`.
//! * CO oxidation (`A + ½B₂ → AB`): coverages `(θ_A, θ_B)` with
//!   `dθ_A/dt = α(1−θ_A−θ_B) − γθ_A − 4k_rθ_Aθ_B` and
//!   `dθ_B/dt = 2β(1−θ_A−θ_B)² − 4k_rθ_Aθ_B`.
//!
//! Both serve as the deterministic "legacy" stepper and as the validation
//! oracle for the stochastic simulator.

mod bifurcation;
mod ode;
mod separatrix;
mod steady;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bifurcation::{bifurcation_scan, fold_brackets, scan_table, ScanRow};
pub use ode::{coverage_columns, integrate, integrate_sampled, integrate_to, Dopri5, OdeOptions, Trajectory};
pub use separatrix::{trace_separatrix, Separatrix, Side};
pub use steady::{classify, find_steady_states, Stability, SteadyState};

/// Tolerance used when checking that a coverage lies in its domain.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Surface coverages, one component for NO and two (`θ_A`, `θ_B`) for CO.
///
/// Stored inline so states are `Copy` and the integrator never allocates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct CoarseState {
    values: [f64; 2],
    dim: usize,
}

impl CoarseState {
    pub fn scalar(theta: f64) -> Self {
        Self {
            values: [theta, 0.0],
            dim: 1,
        }
    }

    pub fn pair(theta_a: f64, theta_b: f64) -> Self {
        Self {
            values: [theta_a, theta_b],
            dim: 2,
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        match *values {
            [a] => Ok(Self::scalar(a)),
            [a, b] => Ok(Self::pair(a, b)),
            _ => Err(Error::InvalidArgument(format!(
                "coarse state must have 1 or 2 components, got {}",
                values.len()
            ))),
        }
    }

    /// Builds a state of dimension `dim` from the leading entries of `raw`.
    pub(crate) fn from_raw(raw: [f64; 2], dim: usize) -> Self {
        let mut values = raw;
        if dim == 1 {
            values[1] = 0.0;
        }
        Self { values, dim }
    }

    pub(crate) fn raw(&self) -> [f64; 2] {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.as_slice()[i]
    }

    /// Largest component-wise absolute difference.
    pub fn max_abs_diff(&self, other: &CoarseState) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks `0 ≤ θ_i ≤ 1` and `Σθ_i ≤ 1`, each up to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let s = self.as_slice();
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite coverage {s:?}")));
        }
        if let Some(v) = s.iter().find(|&&v| v < -tol || v > 1.0 + tol) {
            return Err(Error::Domain(format!("coverage {v} outside [0, 1] in {s:?}")));
        }
        let total: f64 = s.iter().sum();
        if total > 1.0 + tol {
            return Err(Error::Domain(format!("coverages {s:?} sum to {total} > 1")));
        }
        Ok(())
    }
}

impl From<CoarseState> for Vec<f64> {
    fn from(x: CoarseState) -> Self {
        x.as_slice().to_vec()
    }
}

impl TryFrom<Vec<f64>> for CoarseState {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        CoarseState::from_slice(&v)
    }
}

/// Rate constants of the NO reduction mechanism.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoParams {
    /// NO adsorption rate constant.
    pub alpha: f64,
    /// NO desorption rate constant.
    pub gamma: f64,
    /// Reaction rate constant (the manipulated parameter).
    pub k: f64,
}

impl NoParams {
    /// Nominal operating point: α = 1, γ = 0.01, k = 4.5.
    pub fn reference() -> Self {
        Self {
            alpha: 1.0,
            gamma: 0.01,
            k: 4.5,
        }
    }
}

/// Rate constants of the CO oxidation mechanism.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoParams {
    /// CO adsorption rate.
    pub alpha: f64,
    /// O₂ dissociative adsorption rate (the manipulated parameter).
    pub beta: f64,
    /// CO desorption rate.
    pub gamma: f64,
    /// Oxidation rate constant.
    pub k_r: f64,
}

impl CoParams {
    /// Nominal operating point: α = 1.6, β = 3.5, γ = 0.04, k_r = 1.
    pub fn reference() -> Self {
        Self {
            alpha: 1.6,
            beta: 3.5,
            gamma: 0.04,
            k_r: 1.0,
        }
    }
}

/// `dθ/dt` of the NO model.
pub fn rhs_no(theta: f64, p: &NoParams) -> Result<f64> {
    CoarseState::scalar(theta).validate(DOMAIN_TOL)?;
    Ok(no_field(theta, p))
}

/// `(dθ_A/dt, dθ_B/dt)` of the CO model.
pub fn rhs_co(state: &CoarseState, p: &CoParams) -> Result<[f64; 2]> {
    if state.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            found: state.dim(),
        });
    }
    state.validate(DOMAIN_TOL)?;
    Ok(co_field(state.get(0), state.get(1), p))
}

#[inline]
fn no_field(theta: f64, p: &NoParams) -> f64 {
    let vacant = 1.0 - theta;
    p.alpha * vacant - p.gamma * theta - p.k * vacant * vacant * theta
}

#[inline]
fn co_field(a: f64, b: f64, p: &CoParams) -> [f64; 2] {
    let vacant = 1.0 - a - b;
    let rxn = 4.0 * p.k_r * a * b;
    [
        p.alpha * vacant - p.gamma * a - rxn,
        2.0 * p.beta * vacant * vacant - rxn,
    ]
}

/// Which reaction mechanism a [`Model`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    No,
    Co,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::No => "no",
            Mechanism::Co => "co",
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A mechanism together with its rate constants.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", content = "params", rename_all = "lowercase", deny_unknown_fields)]
pub enum Model {
    No(NoParams),
    Co(CoParams),
}

impl Model {
    pub fn mechanism(&self) -> Mechanism {
        match self {
            Model::No(_) => Mechanism::No,
            Model::Co(_) => Mechanism::Co,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::No(_) => 1,
            Model::Co(_) => 2,
        }
    }

    /// Name of the manipulated parameter (`k` for NO, `beta` for CO).
    pub fn control_name(&self) -> &'static str {
        match self {
            Model::No(_) => "k",
            Model::Co(_) => "beta",
        }
    }

    /// Current value of the manipulated parameter.
    pub fn control(&self) -> f64 {
        match self {
            Model::No(p) => p.k,
            Model::Co(p) => p.beta,
        }
    }

    /// Copy of the model with the manipulated parameter set to `value`.
    pub fn with_control(&self, value: f64) -> Model {
        match *self {
            Model::No(p) => Model::No(NoParams { k: value, ..p }),
            Model::Co(p) => Model::Co(CoParams { beta: value, ..p }),
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Model::No(_) => &["alpha", "gamma", "k"],
            Model::Co(_) => &["alpha", "beta", "gamma", "k_r"],
        }
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        match (self, name) {
            (Model::No(p), "alpha") => Ok(p.alpha),
            (Model::No(p), "gamma") => Ok(p.gamma),
            (Model::No(p), "k") => Ok(p.k),
            (Model::Co(p), "alpha") => Ok(p.alpha),
            (Model::Co(p), "beta") => Ok(p.beta),
            (Model::Co(p), "gamma") => Ok(p.gamma),
            (Model::Co(p), "k_r") => Ok(p.k_r),
            _ => Err(self.unknown_param(name)),
        }
    }

    /// Copy of the model with parameter `name` set to `value`.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Model> {
        let mut m = *self;
        match (&mut m, name) {
            (Model::No(p), "alpha") => p.alpha = value,
            (Model::No(p), "gamma") => p.gamma = value,
            (Model::No(p), "k") => p.k = value,
            (Model::Co(p), "alpha") => p.alpha = value,
            (Model::Co(p), "beta") => p.beta = value,
            (Model::Co(p), "gamma") => p.gamma = value,
            (Model::Co(p), "k_r") => p.k_r = value,
            _ => return Err(self.unknown_param(name)),
        }
        Ok(m)
    }

    fn unknown_param(&self, name: &str) -> Error {
        Error::InvalidArgument(format!(
            "unknown {} parameter `{name}` (expected one of {})",
            self.mechanism(),
            self.param_names().join(", ")
        ))
    }

    /// Rejects negative or non-finite rate constants.
    pub fn validate(&self) -> Result<()> {
        for name in self.param_names() {
            let v = self.param(name)?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!(
                    "{} rate constant {name} = {v} must be finite and non-negative",
                    self.mechanism()
                )));
            }
        }
        Ok(())
    }

    /// Right-hand side with domain checking.
    pub fn rhs(&self, x: &CoarseState) -> Result<CoarseState> {
        self.check_dim(x)?;
        x.validate(DOMAIN_TOL)?;
        Ok(CoarseState::from_raw(self.field(&x.raw()), self.dim()))
    }

    /// Unchecked vector field on raw storage; the unused slot of 1-D models is 0.
    #[inline]
    pub(crate) fn field(&self, y: &[f64; 2]) -> [f64; 2] {
        match self {
            Model::No(p) => [no_field(y[0], p), 0.0],
            Model::Co(p) => co_field(y[0], y[1], p),
        }
    }

    /// Analytic Jacobian of the vector field, row-major; only the leading
    /// `dim × dim` block is meaningful.
    pub fn jacobian(&self, x: &CoarseState) -> [[f64; 2]; 2] {
        self.jacobian_raw(&x.raw())
    }

    pub(crate) fn jacobian_raw(&self, y: &[f64; 2]) -> [[f64; 2]; 2] {
        match self {
            Model::No(p) => {
                let th = y[0];
                [[-p.alpha - p.gamma - p.k * (1.0 - th) * (1.0 - 3.0 * th), 0.0], [0.0, 0.0]]
            }
            Model::Co(p) => {
                let (a, b) = (y[0], y[1]);
                let vacant = 1.0 - a - b;
                let k4 = 4.0 * p.k_r;
                [
                    [-p.alpha - p.gamma - k4 * b, -p.alpha - k4 * a],
                    [-4.0 * p.beta * vacant - k4 * b, -4.0 * p.beta * vacant - k4 * a],
                ]
            }
        }
    }

    pub(crate) fn check_dim(&self, x: &CoarseState) -> Result<()> {
        if x.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension {
                expected: self.dim(),
                found: x.dim(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn no() -> NoParams {
        NoParams::reference()
    }

    fn co() -> CoParams {
        CoParams::reference()
    }

    #[test]
    fn no_rhs_on_empty_and_full_surface() {
        assert_eq!(rhs_no(0.0, &no()).unwrap(), 1.0);
        assert_abs_diff_eq!(rhs_no(1.0, &no()).unwrap(), -0.01, epsilon = 1e-15);
    }

    #[test]
    fn no_rhs_near_high_steady_state() {
        assert!(rhs_no(0.9896, &no()).unwrap().abs() < 1e-3);
    }

    #[test]
    fn no_rhs_rejects_out_of_domain() {
        assert!(matches!(rhs_no(1.0 + 1e-9, &no()), Err(Error::Domain(_))));
        assert!(matches!(rhs_no(-1e-9, &no()), Err(Error::Domain(_))));
        assert!(rhs_no(1.0 + 1e-13, &no()).is_ok());
    }

    #[test]
    fn co_rhs_empty_surface() {
        let r = rhs_co(&CoarseState::pair(0.0, 0.0), &co()).unwrap();
        assert_eq!(r, [1.6, 7.0]);
    }

    #[test]
    fn co_rhs_vanishes_at_tabulated_stable_states() {
        for (a, b) in [(0.97101, 0.00137), (0.13944, 0.63553)] {
            let r = rhs_co(&CoarseState::pair(a, b), &co()).unwrap();
            assert!(r[0].abs() < 1e-4 && r[1].abs() < 1e-4, "{r:?} at ({a}, {b})");
        }
    }

    #[test]
    fn co_rhs_rejects_overfull_surface() {
        assert!(rhs_co(&CoarseState::pair(0.6, 0.5), &co()).is_err());
        assert!(matches!(
            rhs_co(&CoarseState::scalar(0.5), &co()),
            Err(Error::UnsupportedDimension { .. })
        ));
    }

    #[test]
    fn control_round_trips_through_model() {
        let m = Model::Co(co()).with_control(2.0);
        assert_eq!(m.control(), 2.0);
        assert_eq!(m.param("beta").unwrap(), 2.0);
        assert_eq!(m.control_name(), "beta");
        assert!(Model::No(no()).with_param("beta", 1.0).is_err());
    }

    #[test]
    fn model_serializes_with_mechanism_tag() {
        let json = serde_json::to_string(&Model::No(no())).unwrap();
        assert_eq!(json, r#"{"mechanism":"no","params":{"alpha":1.0,"gamma":0.01,"k":4.5}}"#);
        let back: Model = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Model::No(no()));
        let x: CoarseState = serde_json::from_str("[0.25, 0.5]").unwrap();
        assert_eq!(x, CoarseState::pair(0.25, 0.5));
        assert!(serde_json::from_str::<CoarseState>("[0.1, 0.2, 0.3]").is_err());
    }

    fn central_jacobian(m: &Model, y: [f64; 2]) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let mut jac = [[0.0; 2]; 2];
        for j in 0..m.dim() {
            let mut yp = y;
            let mut ym = y;
            yp[j] += h;
            ym[j] -= h;
            let fp = m.field(&yp);
            let fm = m.field(&ym);
            for i in 0..m.dim() {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn jacobian_matches_central_differences(
            a in 0.01f64..0.98,
            frac in 0.01f64..0.99,
            k in 0.0f64..10.0,
            beta in 0.0f64..8.0,
        ) {
            let b = (1.0 - a) * frac;
            let cases = [
                (Model::No(NoParams { k, ..no() }), [a, 0.0]),
                (Model::Co(CoParams { beta, ..co() }), [a, b]),
            ];
            for (m, y) in cases {
                let exact = m.jacobian_raw(&y);
                let fd = central_jacobian(&m, y);
                for i in 0..m.dim() {
                    for j in 0..m.dim() {
                        let scale = exact[i][j].abs().max(1.0);
                        prop_assert!((exact[i][j] - fd[i][j]).abs() <= 1e-6 * scale,
                            "{:?} J[{}][{}] exact {} fd {}", m, i, j, exact[i][j], fd[i][j]);
                    }
                }
            }
        }
    }
}
