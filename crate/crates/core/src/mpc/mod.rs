//! Receding-horizon smoothing of the end-effector twist under velocity,
//! acceleration and jerk bounds.

mod model;
mod qp;
mod smoother;

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model::{
    build_model, build_prediction, build_setpoint, AugmentedModel, AugmentedState,
    PredictionMatrices,
};
pub use qp::{
    build_qp, solve_qp, solve_qp_with, HildrethOptions, PlantMemory, QpProblem, QpSolution,
    FEASIBILITY_TOLERANCE,
};
pub use smoother::{SmootherState, StepReport, TwistSmoother};

/// Horizons, sample time and diagonal weights of the twist MPC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub n_c: usize,
    pub n_p: usize,
    /// Seconds.
    pub sample_time: f64,
    /// Per-axis output weight, repeated over the prediction horizon.
    pub q_weight: [f64; 6],
    /// Per-axis weight on `Δu`, repeated over the control horizon.
    pub r_weight: [f64; 6],
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            n_c: 10,
            n_p: 50,
            sample_time: 0.009,
            q_weight: [1.0; 6],
            r_weight: [1e-7; 6],
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_c == 0 || self.n_c > self.n_p {
            return Err(Error::Config(format!(
                "need 1 <= n_c <= n_p, got n_c = {}, n_p = {}",
                self.n_c, self.n_p
            )));
        }
        if !(self.sample_time > 0.0) || !self.sample_time.is_finite() {
            return Err(Error::Config(format!(
                "sample time {} must be positive",
                self.sample_time
            )));
        }
        if self.q_weight.iter().any(|q| !(*q >= 0.0) || !q.is_finite()) {
            return Err(Error::Config("q_weight must be non-negative".into()));
        }
        if self.r_weight.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::Config("r_weight must be positive".into()));
        }
        Ok(())
    }
}

/// Componentwise interval on a 6-vector `[angular; linear]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Vector6<f64>,
    pub max: Vector6<f64>,
}

impl Bounds {
    pub fn symmetric(angular: f64, linear: f64) -> Self {
        let max = Vector6::new(angular, angular, angular, linear, linear, linear);
        Self { min: -max, max }
    }

    pub fn unbounded() -> Self {
        Self::symmetric(f64::INFINITY, f64::INFINITY)
    }

    /// Distance by which `v` leaves the interval on each axis (zero inside).
    pub fn excess(&self, v: &Vector6<f64>) -> Vector6<f64> {
        Vector6::from_fn(|k, _| (v[k] - self.max[k]).max(self.min[k] - v[k]).max(0.0))
    }

    fn validate(&self, what: &'static str) -> Result<()> {
        for axis in 0..6 {
            let (lo, hi) = (self.min[axis], self.max[axis]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo > 0.0 || hi < 0.0 {
                return Err(Error::InfeasibleBounds {
                    what,
                    axis,
                    min: lo,
                    max: hi,
                });
            }
        }
        Ok(())
    }
}

/// Task-space velocity, acceleration and jerk bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSet {
    pub velocity: Bounds,
    pub acceleration: Bounds,
    pub jerk: Bounds,
}

impl LimitSet {
    pub fn unbounded() -> Self {
        Self {
            velocity: Bounds::unbounded(),
            acceleration: Bounds::unbounded(),
            jerk: Bounds::unbounded(),
        }
    }

    /// Cartesian limits published by Franka for the Panda end effector.
    pub fn franka_panda() -> Self {
        Self {
            velocity: Bounds::symmetric(2.5, 1.7),
            acceleration: Bounds::symmetric(25.0, 13.0),
            jerk: Bounds::symmetric(12500.0, 6500.0),
        }
    }

    /// Every interval must be non-empty and contain zero.
    pub fn validate(&self) -> Result<()> {
        self.velocity.validate("velocity")?;
        self.acceleration.validate("acceleration")?;
        self.jerk.validate("jerk")
    }
}

impl Default for LimitSet {
    fn default() -> Self {
        Self::franka_panda()
    }
}
