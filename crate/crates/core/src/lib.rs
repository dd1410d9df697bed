//! Semiclassical backreaction of a quantum scalar field on moving boundaries.
//!
//! Two models are provided:
//!
//! - [`ring1d`]: a 1+1D ring whose circumference evolves under the Casimir
//!   force, optionally including the trace-anomaly kinetic term.
//! - [`box3d`]: a 3+1D box with one moving face driven by the energy of
//!   particles created in the nonadiabatic region of k-space.
//!
//! [`modes`] holds the single-mode machinery both models share and
//! [`numkit`] the numerical kernel underneath.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod box3d;
pub mod error;
pub mod modes;
pub mod numkit;
pub mod record;
pub mod ring1d;

pub use error::{Error, Result};
pub use record::{EnergyBreakdown, HaltReason, MirrorState, Sample, SimulationRecord};
