use nalgebra::{DVector, SVector, Vector6};

use super::model::{build_model, build_prediction, build_setpoint, AugmentedModel, AugmentedState};
use super::qp::{build_qp, solve_qp, PlantMemory};
use super::{LimitSet, MpcConfig, PredictionMatrices};
use crate::dq::{PureDualQuaternion, UnitDualQuaternion};
use crate::error::{Error, Result};

/// Plant quantities after a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherState {
    pub twist: Vector6<f64>,
    pub twist_rate: Vector6<f64>,
    /// Last applied input `u = ξ̈`.
    pub input: Vector6<f64>,
    pub pose: UnitDualQuaternion,
    pub tick: usize,
}

/// Outcome of one receding-horizon tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Smoothed twist `ξ[i+1]`.
    pub twist: Vector6<f64>,
    /// Pose after integrating the smoothed twist over one sample.
    pub pose: UnitDualQuaternion,
    /// First block of the optimal `ΔU`.
    pub delta_u: Vector6<f64>,
    pub input: Vector6<f64>,
    pub active_constraints: usize,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
}

/// Tracks a stream of reference twists with a bounded double integrator
/// and integrates the result into a pose.
#[derive(Debug, Clone)]
pub struct TwistSmoother {
    config: MpcConfig,
    limits: LimitSet,
    model: AugmentedModel,
    prediction: PredictionMatrices,
    plant: SVector<f64, 12>,
    prev_plant: SVector<f64, 12>,
    prev_input: Vector6<f64>,
    pose: UnitDualQuaternion,
    tick: usize,
}

impl TwistSmoother {
    /// Starts at rest at `pose`.
    pub fn new(config: MpcConfig, limits: LimitSet, pose: UnitDualQuaternion) -> Result<Self> {
        config.validate()?;
        limits.validate()?;
        let model = build_model(config.sample_time)?;
        let prediction = build_prediction(&model, config.n_p, config.n_c)?;
        Ok(Self {
            config,
            limits,
            model,
            prediction,
            plant: SVector::zeros(),
            prev_plant: SVector::zeros(),
            prev_input: Vector6::zeros(),
            pose,
            tick: 0,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn limits(&self) -> &LimitSet {
        &self.limits
    }

    pub fn prediction(&self) -> &PredictionMatrices {
        &self.prediction
    }

    pub fn state(&self) -> SmootherState {
        SmootherState {
            twist: self.twist(),
            twist_rate: self.plant.fixed_rows::<6>(6).into_owned(),
            input: self.prev_input,
            pose: self.pose,
            tick: self.tick,
        }
    }

    pub fn twist(&self) -> Vector6<f64> {
        self.plant.fixed_rows::<6>(0).into_owned()
    }

    pub fn pose(&self) -> UnitDualQuaternion {
        self.pose
    }

    /// Current augmented state `[Δx; ξ]`.
    pub fn augmented_state(&self) -> AugmentedState {
        AugmentedState::new(&(self.plant - self.prev_plant), &self.twist())
    }

    /// Runs one tick towards `target`, held constant over the horizon.
    pub fn step(&mut self, target: &Vector6<f64>) -> Result<StepReport> {
        if !target.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("reference twist {target:?}")));
        }
        let state = self.augmented_state();
        let setpoint = build_setpoint(target, self.config.n_p);
        let memory = PlantMemory {
            prev_input: self.prev_input,
            twist_rate: self.plant.fixed_rows::<6>(6).into_owned(),
        };
        let qp = build_qp(
            &state,
            &setpoint,
            &self.prediction,
            &self.config,
            &self.limits,
            &memory,
        )?;
        let sol = solve_qp(&qp)?;
        let delta_u = Vector6::from_iterator(sol.x.rows(0, 6).iter().copied());
        let input = self.prev_input + delta_u;

        let plant = DVector::from_column_slice(self.plant.as_slice());
        let u = DVector::from_column_slice(input.as_slice());
        let next = &self.model.plant_a * plant + &self.model.plant_b * u;
        let next = SVector::<f64, 12>::from_iterator(next.iter().copied());
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("plant state at tick {}", self.tick)));
        }

        self.prev_plant = self.plant;
        self.plant = next;
        self.prev_input = input;
        let twist = self.twist();
        let half = PureDualQuaternion::from_vec6(&twist).scale(0.5 * self.config.sample_time);
        self.pose = (half.exp() * self.pose).renormalized();
        self.tick += 1;

        Ok(StepReport {
            twist,
            pose: self.pose,
            delta_u,
            input,
            active_constraints: sol.active,
            iterations: sol.iterations,
            converged: sol.converged,
            feasible: sol.feasible(),
        })
    }
}
