//! Numerical kernel: ODE integration, adaptive quadrature, finite differences.

pub mod diff;
pub mod ode;
pub mod quad;

pub use diff::{derivative, extrapolate_to_zero, fd_partial, fd_partial_with_step, Extrapolated, Order};
pub use ode::{integrate_ode, solve, OdeOptions, OdeProblem, Solution, StepStats, Termination, Trajectory};
pub use quad::{integrate, quad_adaptive, quad_adaptive_full, Domain, QuadResult, QuadSpec};
