//! Equation-free optimal switching policies for bistable surface reactions.
//!
//! A kinetic Monte Carlo (Gillespie) simulator of two catalytic mechanisms is
//! wrapped into a *coarse time-stepper*: a coverage vector is lifted to an
//! ensemble of microscopic states, each replica evolves for one reporting
//! interval at a fixed parameter value, and the ensemble is restricted back
//! to its mean coverage. Derivative-free optimizers then search over
//! piecewise-constant parameter policies that switch the expected state from
//! one stable steady state into the basin of the other.
//!
//! The mean-field ODE models of both mechanisms are implemented alongside,
//! both as a deterministic ("legacy") stepper and as the oracle used to
//! validate the stochastic path.
//!
//! Steppers and optimizers are strategies behind the [`stepper::CoarseStepper`]
//! and [`optim::Optimizer`] traits, registered by name in a [`registry::Registry`].

// NaN-rejecting checks are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kmc;
pub mod meanfield;
pub mod objective;
pub mod optim;
pub mod registry;
pub mod seed;
pub mod stepper;
pub mod table;

pub use error::{Error, Result};
pub use meanfield::{CoParams, CoarseState, Model, NoParams};
