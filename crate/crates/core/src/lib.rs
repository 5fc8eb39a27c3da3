//! Screw-linear trajectory generation, twist-smoothing MPC and dual quaternion
//! kinematic control for serial manipulators.

// Negated comparisons double as NaN rejection throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dq;
pub mod error;
pub mod harness;
pub mod io;
pub mod kinematics;
pub mod mpc;
pub mod screw_path;

pub use error::{Error, Result};
